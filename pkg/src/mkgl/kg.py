"""Knowledge graph loading, indexing, and neighborhood access.

Graphs are immutable after load. Every original triplet (h, r, t) materializes
two adjacency edges: (r, t) on h and (inv(r), h) on t, where inverse relations
occupy ids [n_base_relations, 2 * n_base_relations) and are named "inv:<name>".
Head prediction (?, r, t) is thereby reframed as tail prediction (t, inv:r, ?).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .utils import rng_for


class GraphFormatError(ValueError):
    """Malformed or invalid graph input; message carries file/line context."""


@dataclass(frozen=True)
class Triplet:
    head: int
    relation: int
    tail: int


@dataclass
class KnowledgeGraph:
    entities: list[str]
    relations: list[str]  # base relations then their inverses
    n_base_relations: int
    triplets: list[Triplet]
    out_adjacency: list[list[tuple[int, int]]] = field(repr=False)
    degree: list[int] = field(repr=False)
    entity_index: dict[str, int] = field(repr=False)
    relation_index: dict[str, int] = field(repr=False)
    triplets_by_relation: list[list[int]] = field(repr=False)

    @property
    def n_entities(self):
        return len(self.entities)

    @property
    def n_relations(self):
        return len(self.relations)

    def inverse(self, relation):
        nb = self.n_base_relations
        return relation + nb if relation < nb else relation - nb

    def has_triplet(self, head, relation, tail):
        return (head, relation, tail) in self._triplet_set

    def __post_init__(self):
        self._triplet_set = {(t.head, t.relation, t.tail) for t in self.triplets}


def _validate_name(name, path, lineno, kind):
    name = name.strip()
    if not name:
        raise GraphFormatError(f"{path}:{lineno}: empty {kind} name")
    return name


def build_graph(raw_triplets, relation_vocab=None, entity_vocab=None, source="<memory>"):
    """Index (head, relation, tail) name triples into a KnowledgeGraph.

    Ids are assigned by first occurrence, so reloading the same input yields
    the same assignment. Duplicate triplets are dropped. `relation_vocab`
    fixes the base relation list (used to align an inductive fact graph with
    the training relation ids); unseen relations are then rejected.
    """
    entities: list[str] = []
    entity_index: dict[str, int] = {}
    if entity_vocab is not None:
        entities = list(entity_vocab)
        entity_index = {n: i for i, n in enumerate(entities)}

    fixed_relations = relation_vocab is not None
    relations: list[str] = list(relation_vocab) if fixed_relations else []
    relation_index = {n: i for i, n in enumerate(relations)}

    def entity_id(name, lineno):
        i = entity_index.get(name)
        if i is None:
            if entity_vocab is not None:
                raise GraphFormatError(f"{source}:{lineno}: entity '{name}' not in the fixed entity set")
            i = len(entities)
            entities.append(name)
            entity_index[name] = i
        return i

    def relation_id(name, lineno):
        i = relation_index.get(name)
        if i is None:
            if fixed_relations:
                raise GraphFormatError(f"{source}:{lineno}: relation '{name}' not in the training relation set")
            i = len(relations)
            relations.append(name)
            relation_index[name] = i
        return i

    triplets: list[Triplet] = []
    seen = set()
    for lineno, (h, r, t) in raw_triplets:
        h = _validate_name(h, source, lineno, "entity")
        r = _validate_name(r, source, lineno, "relation")
        t = _validate_name(t, source, lineno, "entity")
        trip = (entity_id(h, lineno), relation_id(r, lineno), entity_id(t, lineno))
        if trip in seen:
            continue
        seen.add(trip)
        triplets.append(Triplet(*trip))

    n_base = len(relations)
    all_relations = relations + [f"inv:{name}" for name in relations]
    full_index = {n: i for i, n in enumerate(all_relations)}

    out_adjacency: list[list[tuple[int, int]]] = [[] for _ in entities]
    triplets_by_relation: list[list[int]] = [[] for _ in range(n_base)]
    for ti, trip in enumerate(triplets):
        out_adjacency[trip.head].append((trip.relation, trip.tail))
        out_adjacency[trip.tail].append((trip.relation + n_base, trip.head))
        triplets_by_relation[trip.relation].append(ti)
    for adj in out_adjacency:
        adj.sort()

    return KnowledgeGraph(
        entities=entities,
        relations=all_relations,
        n_base_relations=n_base,
        triplets=triplets,
        out_adjacency=out_adjacency,
        degree=[len(adj) for adj in out_adjacency],
        entity_index=entity_index,
        relation_index=full_index,
        triplets_by_relation=triplets_by_relation,
    )


def _read_tsv(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such triplet file: {path}")
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise GraphFormatError(
                    f"{path}:{lineno}: expected head<TAB>relation<TAB>tail, got {len(parts)} fields"
                )
            rows.append((lineno, tuple(parts)))
    return rows


def load_graph(path, format="tsv-triples", relation_vocab=None):
    if format != "tsv-triples":
        raise ValueError(f"unsupported graph format: {format}")
    return build_graph(_read_tsv(path), relation_vocab=relation_vocab, source=str(path))


def read_triplet_names(path):
    """Eval-split triples as name tuples, without building a graph."""
    return [names for _, names in _read_tsv(path)]


def resolve_triplets(graph, name_triples, source="<eval>"):
    out = []
    for h, r, t in name_triples:
        try:
            out.append(Triplet(graph.entity_index[h], graph.relation_index[r], graph.entity_index[t]))
        except KeyError as exc:
            raise GraphFormatError(f"{source}: unknown name {exc.args[0]!r}") from None
    return out


def neighbors(graph, entity, cap, seed=0):
    """Adjacent (relation, neighbor) pairs, deterministically capped.

    The full list is sorted by (relation id, neighbor id); when the degree
    exceeds `cap`, a seeded uniform sample of `cap` edges is taken and
    returned in sorted order.
    """
    if not 0 <= entity < len(graph.entities):
        raise IndexError(f"entity id {entity} out of range [0, {len(graph.entities)})")
    if cap < 1:
        raise ValueError(f"neighbor cap must be >= 1, got {cap}")
    adj = graph.out_adjacency[entity]
    if len(adj) <= cap:
        return list(adj)
    rng = rng_for(seed, "neighbors", entity)
    idx = np.sort(rng.choice(len(adj), size=cap, replace=False))
    return [adj[i] for i in idx]


@dataclass
class InductiveBundle:
    train_graph: KnowledgeGraph
    fact_graph: KnowledgeGraph
    eval_triplets: list[Triplet]  # indexed against fact_graph


def make_inductive_bundle(train_graph, fact_graph, eval_triplets):
    overlap = set(train_graph.entities) & set(fact_graph.entities)
    if overlap:
        sample = sorted(overlap)[:5]
        raise GraphFormatError(
            f"inductive fact graph shares {len(overlap)} entity name(s) with the training graph, e.g. {sample}"
        )
    train_rels = set(train_graph.relations[: train_graph.n_base_relations])
    fact_rels = set(fact_graph.relations[: fact_graph.n_base_relations])
    if not fact_rels <= train_rels:
        raise GraphFormatError(f"fact graph uses relations unseen in training: {sorted(fact_rels - train_rels)}")
    for trip in eval_triplets:
        if not (0 <= trip.head < fact_graph.n_entities and 0 <= trip.tail < fact_graph.n_entities):
            raise GraphFormatError("inductive eval triplet references an entity outside the fact graph")
        if not 0 <= trip.relation < fact_graph.n_base_relations:
            raise GraphFormatError("inductive eval triplet references a relation outside the training set")
    return InductiveBundle(train_graph, fact_graph, eval_triplets)


def load_inductive(train_path, fact_path, eval_path):
    train_graph = load_graph(train_path)
    base = train_graph.relations[: train_graph.n_base_relations]
    fact_graph = load_graph(fact_path, relation_vocab=base)
    eval_triplets = resolve_triplets(fact_graph, read_triplet_names(eval_path), source=str(eval_path))
    return make_inductive_bundle(train_graph, fact_graph, eval_triplets)
