"""Base subword tokenizer plus the appended KGL token range.

The base tokenizer is byte-level BPE: ids 0..255 are raw bytes, each merge
adds one token, and unknown input always falls back to bytes, so decode is
lossless for any unicode string. KGL tokens for a graph's entities and
relations (inverses included) are appended after the base range; their text
surface form is "<kgl: NAME>" and they always tokenize to a single id.
"""

from __future__ import annotations

import re
from collections import Counter
from pathlib import Path


class VocabularyError(ValueError):
    pass


def kgl_surface(name):
    return f"<kgl: {name}>"


class Vocabulary:
    def __init__(self, base_tokens, merges, kgl_entities=None, kgl_relations=None):
        self.base_tokens = list(base_tokens)
        self.merges = list(merges)
        self.kgl_entities = list(kgl_entities) if kgl_entities is not None else None
        self.kgl_relations = list(kgl_relations) if kgl_relations is not None else None
        self._merge_rank = {pair: i for i, pair in enumerate(self.merges)}
        self._encode_cache = {}
        self._special_re = None
        self._special_ids = None
        if self.kgl_entities is not None:
            self._build_special_index()

    # -- sizes ------------------------------------------------------------

    @property
    def n_base(self):
        return len(self.base_tokens)

    @property
    def kgl_offset(self):
        return len(self.base_tokens)

    @property
    def has_kgl(self):
        return self.kgl_entities is not None

    @property
    def n_total(self):
        if not self.has_kgl:
            return self.n_base
        return self.n_base + len(self.kgl_entities) + len(self.kgl_relations)

    def entity_token(self, entity_id):
        if not 0 <= entity_id < len(self.kgl_entities):
            raise IndexError(f"entity id {entity_id} out of KGL range")
        return self.kgl_offset + entity_id

    def relation_token(self, relation_id):
        if not 0 <= relation_id < len(self.kgl_relations):
            raise IndexError(f"relation id {relation_id} out of KGL range")
        return self.kgl_offset + len(self.kgl_entities) + relation_id

    def kgl_kind(self, token_id):
        """('entity'|'relation', graph id) for a KGL token id."""
        k = token_id - self.kgl_offset
        if k < 0 or not self.has_kgl or token_id >= self.n_total:
            raise IndexError(f"token {token_id} is not a KGL token")
        if k < len(self.kgl_entities):
            return "entity", k
        return "relation", k - len(self.kgl_entities)

    # -- encoding ---------------------------------------------------------

    def _merge_pass(self, ids):
        # classic BPE application: repeatedly apply the lowest-ranked merge present
        while len(ids) > 1:
            best = None
            for pair in zip(ids, ids[1:]):
                rank = self._merge_rank.get(pair)
                if rank is not None and (best is None or rank < best[0]):
                    best = (rank, pair)
            if best is None:
                break
            a, b = best[1]
            merged_id = 256 + best[0]
            out = []
            i = 0
            while i < len(ids):
                if i + 1 < len(ids) and ids[i] == a and ids[i + 1] == b:
                    out.append(merged_id)
                    i += 2
                else:
                    out.append(ids[i])
                    i += 1
            ids = out
        return ids

    def encode_base(self, text):
        """Base-subword ids only; KGL surfaces are not recognized."""
        cached = self._encode_cache.get(text)
        if cached is None:
            cached = self._merge_pass(list(text.encode("utf-8")))
            self._encode_cache[text] = cached
        return list(cached)

    def _build_special_index(self):
        names = [(kgl_surface(n), self.kgl_offset + i) for i, n in enumerate(self.kgl_entities)]
        off = self.kgl_offset + len(self.kgl_entities)
        names += [(kgl_surface(n), off + i) for i, n in enumerate(self.kgl_relations)]
        self._special_ids = dict(names)
        ordered = sorted(self._special_ids, key=len, reverse=True)
        self._special_re = re.compile("|".join(re.escape(s) for s in ordered))

    def encode(self, text):
        """Tokenize text, mapping each KGL surface form to its single id."""
        if not self.has_kgl:
            return self.encode_base(text)
        out = []
        pos = 0
        for m in self._special_re.finditer(text):
            if m.start() > pos:
                out.extend(self.encode_base(text[pos : m.start()]))
            out.append(self._special_ids[m.group(0)])
            pos = m.end()
        if pos < len(text):
            out.extend(self.encode_base(text[pos:]))
        return out

    def decode(self, ids):
        parts = []
        buf = bytearray()
        for i in ids:
            if i < self.n_base:
                buf.extend(self.base_tokens[i])
            else:
                if buf:
                    parts.append(buf.decode("utf-8", errors="replace"))
                    buf = bytearray()
                kind, k = self.kgl_kind(i)
                name = self.kgl_entities[k] if kind == "entity" else self.kgl_relations[k]
                parts.append(kgl_surface(name))
        if buf:
            parts.append(buf.decode("utf-8", errors="replace"))
        return "".join(parts)

    # -- persistence --------------------------------------------------------

    def save(self, path):
        lines = ["mkgl-vocab v1", f"base {self.n_base}"]
        lines += [tok.hex() for tok in self.base_tokens]
        lines.append(f"merges {len(self.merges)}")
        lines += [f"{a} {b}" for a, b in self.merges]
        if self.has_kgl:
            lines.append(f"kgl {len(self.kgl_entities)} {len(self.kgl_relations)}")
            lines += [f"E\t{n}" for n in self.kgl_entities]
            lines += [f"R\t{n}" for n in self.kgl_relations]
        else:
            lines.append("kgl - -")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or lines[0] != "mkgl-vocab v1":
            raise VocabularyError(f"{path}: not a v1 vocabulary file")
        i = 1
        n_base = int(lines[i].split()[1])
        i += 1
        base = [bytes.fromhex(lines[i + k]) for k in range(n_base)]
        i += n_base
        n_merges = int(lines[i].split()[1])
        i += 1
        merges = []
        for k in range(n_merges):
            a, b = lines[i + k].split()
            merges.append((int(a), int(b)))
        i += n_merges
        head = lines[i].split()
        i += 1
        if head[1] == "-":
            return cls(base, merges)
        n_e, n_r = int(head[1]), int(head[2])
        ents = [lines[i + k].split("\t", 1)[1] for k in range(n_e)]
        i += n_e
        rels = [lines[i + k].split("\t", 1)[1] for k in range(n_r)]
        return cls(base, merges, ents, rels)


def train_base_tokenizer(corpus, vocab_size, pad_to_size=True):
    """Learn a byte-level BPE vocabulary from an iterator of strings.

    Merges are chosen by highest pair count, ties broken by the lexicographically
    smallest byte-string pair, so training is deterministic given corpus order.
    When the corpus runs out of repeating pairs, the table is padded with
    reserved unused tokens up to `vocab_size`.
    """
    if vocab_size < 256:
        raise VocabularyError(f"vocab_size must be >= 256, got {vocab_size}")
    sequences = [list(s.encode("utf-8")) for s in corpus if s]
    if not sequences:
        raise VocabularyError("empty corpus")

    tokens = [bytes([b]) for b in range(256)]
    merges = []
    while len(tokens) < vocab_size:
        counts = Counter()
        for seq in sequences:
            counts.update(zip(seq, seq[1:]))
        if not counts:
            break
        best_count = max(counts.values())
        if best_count < 2:
            break
        best = min(
            (pair for pair, c in counts.items() if c == best_count),
            key=lambda p: (tokens[p[0]], tokens[p[1]]),
        )
        new_id = len(tokens)
        tokens.append(tokens[best[0]] + tokens[best[1]])
        merges.append(best)
        a, b = best
        for si, seq in enumerate(sequences):
            out = []
            i = 0
            while i < len(seq):
                if i + 1 < len(seq) and seq[i] == a and seq[i + 1] == b:
                    out.append(new_id)
                    i += 2
                else:
                    out.append(seq[i])
                    i += 1
            sequences[si] = out

    if pad_to_size:
        while len(tokens) < vocab_size:
            tokens.append(f"<unused{len(tokens)}>".encode("utf-8"))
    return Vocabulary(tokens, merges)


def extend_with_kgl(vocab, graph):
    """Append one KGL token per entity, then per relation (inverses included)."""
    if vocab.has_kgl:
        raise VocabularyError("vocabulary already carries KGL tokens")
    return Vocabulary(vocab.base_tokens, vocab.merges, list(graph.entities), list(graph.relations))
