"""Dictionary-style prompt rendering for KGL completion and generation.

The English template is frozen verbatim below; token lengths are reproducible
because every rendered piece comes from these constants plus graph names.
Completion prompts carry a two-row dictionary (head entity + relation), each
row with at most one example sentence sampled from the graph; generation
prompts carry only the entity row, with no example, and end the query after
the head token.
"""

from __future__ import annotations

from dataclasses import dataclass

from .utils import rng_for
from .vocab import kgl_surface

PREAMBLE_COMPLETION = (
    "Supposed that you are a linguist versed in an esoteric three-word "
    "knowledge graph language. Given the following dictionary comprising "
    "two words from this language,\n"
)
PREAMBLE_GENERATION = (
    "Supposed that you are a linguist versed in an esoteric three-word "
    "knowledge graph language. Given the following dictionary comprising "
    "one word from this language,\n"
)
TABLE_HEADER = "Word | Type | Translation | Example\n"
COMPLETION_MARKER = "please kindly complete the following sentence:\n"
CELL_SEP = " | "
ROW_END = "\n"
TYPE_ENTITY = "entity noun"
TYPE_RELATION = "relation verb"


@dataclass
class RenderedInstruction:
    token_ids: list[int]
    kgl_positions: list[int]
    head: int
    relation: int | None
    target: int | None


def _display_for_edge(entity, rel, nbr, n_base):
    """Canonical original-direction triplet for an adjacency edge of `entity`."""
    if rel < n_base:
        return (entity, rel, nbr)
    return (nbr, rel - n_base, entity)


def _entity_example_pool(graph, entity, target):
    pool = []
    for rel, nbr in graph.out_adjacency[entity]:
        d = _display_for_edge(entity, rel, nbr, graph.n_base_relations)
        if target is not None and target in (d[0], d[2]):
            continue
        pool.append(d)
    return pool


def _relation_example_pool(graph, relation, target):
    nb = graph.n_base_relations
    base = relation if relation < nb else relation - nb
    pool = []
    for ti in graph.triplets_by_relation[base]:
        t = graph.triplets[ti]
        if target is not None and target in (t.head, t.tail):
            continue
        if relation < nb:
            pool.append((t.head, relation, t.tail))
        else:
            pool.append((t.tail, relation, t.head))
    return pool


class _Renderer:
    """Assembles token id sequences directly from cached template pieces."""

    def __init__(self, graph, vocab):
        if not vocab.has_kgl:
            raise ValueError("vocabulary has no KGL tokens; call extend_with_kgl first")
        self.graph = graph
        self.vocab = vocab

    def _emit_text(self, ids, kgl_pos, text):
        ids.extend(self.vocab.encode_base(text))

    def _emit_kgl(self, ids, kgl_pos, token):
        kgl_pos.append(len(ids))
        ids.append(token)

    def _emit_example(self, ids, kgl_pos, triplet):
        h, r, t = triplet
        self._emit_kgl(ids, kgl_pos, self.vocab.entity_token(h))
        self._emit_kgl(ids, kgl_pos, self.vocab.relation_token(r))
        self._emit_kgl(ids, kgl_pos, self.vocab.entity_token(t))

    def _emit_row(self, ids, kgl_pos, word_token, type_text, translation, example):
        self._emit_kgl(ids, kgl_pos, word_token)
        self._emit_text(ids, kgl_pos, CELL_SEP + type_text + CELL_SEP + translation + CELL_SEP)
        if example is not None:
            self._emit_example(ids, kgl_pos, example)
        self._emit_text(ids, kgl_pos, ROW_END)


def render_instruction(graph, vocab, head, relation, rng_seed, target=None):
    """Completion prompt for the query (head, relation, ?).

    When `target` is given (training), example sentences exclude the query
    triplet and any triplet touching the target, so the gold tail token can
    never appear in the input. Deterministic given `rng_seed`.
    """
    r = _Renderer(graph, vocab)
    rng = rng_for(rng_seed, "instr", head, relation)

    e_pool = _entity_example_pool(graph, head, target)
    e_example = e_pool[rng.integers(len(e_pool))] if e_pool else None
    r_pool = _relation_example_pool(graph, relation, target)
    r_example = r_pool[rng.integers(len(r_pool))] if r_pool else None

    ids: list[int] = []
    kgl_pos: list[int] = []
    r._emit_text(ids, kgl_pos, PREAMBLE_COMPLETION + TABLE_HEADER)
    r._emit_row(ids, kgl_pos, vocab.entity_token(head), TYPE_ENTITY, graph.entities[head], e_example)
    r._emit_row(ids, kgl_pos, vocab.relation_token(relation), TYPE_RELATION, graph.relations[relation], r_example)
    r._emit_text(ids, kgl_pos, COMPLETION_MARKER)
    r._emit_kgl(ids, kgl_pos, vocab.entity_token(head))
    r._emit_kgl(ids, kgl_pos, vocab.relation_token(relation))
    return RenderedInstruction(ids, kgl_pos, head, relation, target)


def render_generation_prompt(graph, vocab, head, rng_seed):
    """Open-ended prompt: entity dictionary row only, query is the head alone."""
    r = _Renderer(graph, vocab)
    ids: list[int] = []
    kgl_pos: list[int] = []
    r._emit_text(ids, kgl_pos, PREAMBLE_GENERATION + TABLE_HEADER)
    r._emit_row(ids, kgl_pos, vocab.entity_token(head), TYPE_ENTITY, graph.entities[head], None)
    r._emit_text(ids, kgl_pos, COMPLETION_MARKER)
    r._emit_kgl(ids, kgl_pos, vocab.entity_token(head))
    return RenderedInstruction(ids, kgl_pos, head, None, None)


def _plain_triplet(graph, triplet):
    h, r, t = triplet
    return f"{graph.entities[h]} {graph.relations[r]} {graph.entities[t]}"


def render_instruction_text(graph, head, relation, rng_seed, target=None, kgl_markup=False):
    """The completion prompt as plain text (names spelled out).

    Used to pretrain the backbone on base tokens only. With `kgl_markup` the
    word cells and examples use the "<kgl: ...>" surface forms instead of bare
    names, which matches what extended-vocabulary encoding would see.
    """
    rng = rng_for(rng_seed, "instr", head, relation)
    e_pool = _entity_example_pool(graph, head, target)
    e_example = e_pool[rng.integers(len(e_pool))] if e_pool else None
    r_pool = _relation_example_pool(graph, relation, target)
    r_example = r_pool[rng.integers(len(r_pool))] if r_pool else None

    def word(name):
        return kgl_surface(name) if kgl_markup else name

    def show(triplet):
        if triplet is None:
            return ""
        h, r, t = triplet
        if kgl_markup:
            return kgl_surface(graph.entities[h]) + kgl_surface(graph.relations[r]) + kgl_surface(graph.entities[t])
        return _plain_triplet(graph, triplet)

    head_name = graph.entities[head]
    rel_name = graph.relations[relation]
    return (
        PREAMBLE_COMPLETION
        + TABLE_HEADER
        + word(head_name) + CELL_SEP + TYPE_ENTITY + CELL_SEP + head_name + CELL_SEP + show(e_example) + ROW_END
        + word(rel_name) + CELL_SEP + TYPE_RELATION + CELL_SEP + rel_name + CELL_SEP + show(r_example) + ROW_END
        + COMPLETION_MARKER
        + word(head_name) + (" " if not kgl_markup else "") + word(rel_name)
    )


def render_verbalized_instruction_text(graph, head, relation, neighbor_cap, rng_seed):
    """In-context baseline: the same prompt with 1-hop neighborhoods inlined.

    Instead of retriever-backed KGL tokens, each dictionary row verbalizes
    every incident triplet (up to `neighbor_cap`) as text. This is the input
    the context retriever replaces; `prepare` reports the mean length of both
    forms.
    """
    from .kg import neighbors

    nb = graph.n_base_relations
    head_edges = neighbors(graph, head, neighbor_cap, seed=rng_seed)
    head_ctx = "; ".join(
        _plain_triplet(graph, _display_for_edge(head, rel, nbr, nb)) for rel, nbr in head_edges
    )
    base = relation if relation < nb else relation - nb
    rel_triplets = [graph.triplets[i] for i in graph.triplets_by_relation[base]]
    if len(rel_triplets) > neighbor_cap:
        rng = rng_for(rng_seed, "verbalized", relation)
        idx = sorted(rng.choice(len(rel_triplets), size=neighbor_cap, replace=False))
        rel_triplets = [rel_triplets[i] for i in idx]
    rel_ctx = "; ".join(_plain_triplet(graph, (t.head, t.relation, t.tail)) for t in rel_triplets)

    head_name = graph.entities[head]
    rel_name = graph.relations[relation]
    return (
        PREAMBLE_COMPLETION
        + TABLE_HEADER
        + head_name + CELL_SEP + TYPE_ENTITY + CELL_SEP + head_name + CELL_SEP + head_ctx + ROW_END
        + rel_name + CELL_SEP + TYPE_RELATION + CELL_SEP + rel_name + CELL_SEP + rel_ctx + ROW_END
        + COMPLETION_MARKER
        + head_name + " " + rel_name
    )
