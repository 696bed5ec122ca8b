"""Per-student Bayesian network: assembly, evidence, and exact posteriors.

The network holds one binary variable per concept, per synthetic
accumulator (chain factorization of wide concept nodes), and per answered
question.  Unanswered questions are never materialized, so the variable
count is bounded by concepts + accumulators + distinct answered questions.

Posteriors are exact:

  posteriors()        variable elimination with a static min-degree order
                      (ties broken by variable id), restricted per query to
                      the ancestral closure of the query and the evidence
                      and then to the query's connected component.
  enumerate_oracle()  full-joint summation, for tests; O(2^n).

Both are deterministic: identical inputs give bitwise-identical numbers.
Factors are renormalized by their maximum after every elimination step so
long evidence chains cannot underflow; the final one-variable factor is
normalized into a probability.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from studymap import factors as fk
from studymap.concepts import (
    DEFAULT_FAN_IN_MAX,
    ConceptMap,
    additive_table,
    factorize_weighted_cpt,
)
from studymap.errors import InferenceBudgetError, ModelError, UnknownEntityError
from studymap.evidence import STRATEGY_LINEAR, QuestionMeta, build_evidence_cpt

DEFAULT_BUDGET_ENTRIES = 1 << 20
ORACLE_MAX_VARS = 22

KIND_CONCEPT = "concept"
KIND_ACCUMULATOR = "accumulator"
KIND_QUESTION = "question"


@dataclass(frozen=True)
class Factor:
    """Table over a sorted tuple of variable indices (last index = LSB)."""

    vars: tuple[int, ...]
    table: np.ndarray


@dataclass(frozen=True)
class Network:
    """Immutable network value; set_evidence returns an updated copy."""

    concept_map: ConceptMap
    strategy: str
    fan_in_max: int
    budget_entries: int
    var_ids: tuple[str, ...]
    var_index: dict[str, int]
    var_kind: dict[str, str]
    parents: dict[str, tuple[str, ...]]
    cpt_factors: tuple[Factor, ...]  # one per variable, sorted by variable id
    evidence: dict[str, int]  # question id -> 0/1
    metas: dict[str, QuestionMeta]

    @property
    def variable_count(self) -> int:
        return len(self.var_ids)


def _cpt_to_factor(
    parent_ids: tuple[str, ...],
    child_id: str,
    prob_one: np.ndarray,
    var_index: dict[str, int],
) -> Factor:
    """Expand P(child=1 | parents) into a joint-style factor, axes sorted
    by variable index."""
    k = len(parent_ids)
    shaped = prob_one.reshape((2,) * k) if k else prob_one.reshape(())
    stacked = np.stack([1.0 - shaped, shaped], axis=-1)  # axes: parents..., child
    axis_vars = [var_index[p] for p in parent_ids] + [var_index[child_id]]
    order = sorted(range(k + 1), key=lambda i: axis_vars[i])
    transposed = np.ascontiguousarray(np.transpose(stacked, order))
    return Factor(vars=tuple(sorted(axis_vars)), table=transposed.reshape(-1))


def _prior_factor(var: int, prior: float) -> Factor:
    return Factor(vars=(var,), table=np.array([1.0 - prior, prior], dtype=np.float64))


def build_network(
    cmap: ConceptMap,
    answered: list[tuple[QuestionMeta, int]] | None = None,
    strategy: str = STRATEGY_LINEAR,
    fan_in_max: int = DEFAULT_FAN_IN_MAX,
    budget_entries: int = DEFAULT_BUDGET_ENTRIES,
) -> Network:
    """Assemble the network for one student.

    *answered* holds (meta, outcome) pairs in answer order; a question
    answered more than once keeps only its last outcome.  Two answers with
    the same question id but different metadata are rejected.
    """
    answered = answered or []

    last: dict[str, tuple[QuestionMeta, int]] = {}
    for meta, outcome in answered:
        if outcome not in (0, 1):
            raise ModelError(f"outcome for {meta.question_id!r} must be 0 or 1, got {outcome!r}")
        if meta.question_id in last and last[meta.question_id][0] != meta:
            raise ModelError(f"question {meta.question_id!r} appears twice with conflicting metadata")
        last[meta.question_id] = (meta, outcome)

    for meta, _ in last.values():
        for cid in meta.concept_ids:
            if cid not in cmap.nodes:
                raise ModelError(f"question {meta.question_id!r} references unknown concept {cid!r}")

    # Variable order: concepts in preorder, accumulators as created, then
    # questions sorted by id.  The order is an implementation detail; all
    # public determinism comes from sorting factors and ids by name.
    var_ids: list[str] = []
    var_kind: dict[str, str] = {}
    parents: dict[str, tuple[str, ...]] = {}

    for cid in cmap.preorder():
        var_ids.append(cid)
        var_kind[cid] = KIND_CONCEPT

    acc_plan = {}
    for cid in cmap.preorder():
        node = cmap.nodes[cid]
        if node.is_leaf:
            parents[cid] = ()
            continue
        accumulators, final_parents = factorize_weighted_cpt(node, fan_in_max)
        acc_plan[cid] = (accumulators, final_parents)
        for acc in accumulators:
            var_ids.append(acc.id)
            var_kind[acc.id] = KIND_ACCUMULATOR
            parents[acc.id] = tuple(pid for pid, _ in acc.parents)
        parents[cid] = tuple(pid for pid, _ in final_parents)

    question_ids = sorted(last.keys())
    for qid in question_ids:
        meta, _ = last[qid]
        if qid in var_kind:
            raise ModelError(f"question id {qid!r} collides with a concept id")
        var_ids.append(qid)
        var_kind[qid] = KIND_QUESTION
        parents[qid] = meta.concept_ids

    var_index = {vid: i for i, vid in enumerate(var_ids)}

    cpts: list[tuple[str, Factor]] = []
    for cid in cmap.preorder():
        node = cmap.nodes[cid]
        if node.is_leaf:
            cpts.append((cid, _prior_factor(var_index[cid], cmap.leaf_prior(cid))))
            continue
        accumulators, final_parents = acc_plan[cid]
        for acc in accumulators:
            table = np.asarray(additive_table(tuple(w for _, w in acc.parents)))
            cpts.append((acc.id, _cpt_to_factor(parents[acc.id], acc.id, table, var_index)))
        table = np.asarray(additive_table(tuple(w for _, w in final_parents)))
        cpts.append((cid, _cpt_to_factor(parents[cid], cid, table, var_index)))
    for qid in question_ids:
        meta, _ = last[qid]
        cpt = build_evidence_cpt(meta, strategy)
        table = np.asarray(cpt.table)
        cpts.append((qid, _cpt_to_factor(meta.concept_ids, qid, table, var_index)))

    cpts.sort(key=lambda pair: pair[0])

    return Network(
        concept_map=cmap,
        strategy=strategy,
        fan_in_max=fan_in_max,
        budget_entries=budget_entries,
        var_ids=tuple(var_ids),
        var_index=var_index,
        var_kind=var_kind,
        parents=parents,
        cpt_factors=tuple(f for _, f in cpts),
        evidence={qid: last[qid][1] for qid in question_ids},
        metas={qid: last[qid][0] for qid in question_ids},
    )


def set_evidence(net: Network, question_id: str, outcome: int) -> Network:
    """Replace the outcome of an existing question node; last answer wins."""
    if question_id not in net.metas:
        raise UnknownEntityError(f"no question node {question_id!r} in this network")
    if outcome not in (0, 1):
        raise ModelError(f"outcome must be 0 or 1, got {outcome!r}")
    evidence = dict(net.evidence)
    evidence[question_id] = outcome
    return replace(net, evidence=evidence)


def _reduce(factor: Factor, var: int, value: int) -> Factor:
    """Condition a factor on var=value (drops the variable)."""
    pos = factor.vars.index(var)
    k = len(factor.vars)
    shaped = factor.table.reshape((2,) * k)
    idx = tuple(value if i == pos else slice(None) for i in range(k))
    remaining = factor.vars[:pos] + factor.vars[pos + 1:]
    return Factor(vars=remaining, table=np.ascontiguousarray(shaped[idx].reshape(-1)))


def _product(a: Factor, b: Factor, budget_entries: int) -> Factor:
    vars_out = tuple(sorted(set(a.vars) | set(b.vars)))
    if (1 << len(vars_out)) > budget_entries:
        raise InferenceBudgetError(len(vars_out), budget_entries)
    return Factor(vars=vars_out, table=fk.product(a.vars, a.table, b.vars, b.table, vars_out))


def _marginalize(factor: Factor, var: int) -> Factor:
    pos = factor.vars.index(var)
    remaining = factor.vars[:pos] + factor.vars[pos + 1:]
    return Factor(vars=remaining, table=fk.marginalize(factor.vars, factor.table, pos))


def _min_degree_order(scopes: list[tuple[int, ...]], keep: set[int], id_of) -> list[int]:
    """Greedy min-degree elimination order over the scope graph.

    Each factor scope is a clique.  Ties break on the variable id string so
    the order, and therefore every float result, is reproducible.
    """
    adjacency: dict[int, set[int]] = {}
    for scope in scopes:
        for v in scope:
            adjacency.setdefault(v, set())
        for i, v in enumerate(scope):
            for w in scope[i + 1:]:
                adjacency[v].add(w)
                adjacency[w].add(v)
    remaining = set(adjacency) - keep
    order: list[int] = []
    while remaining:
        v = min(remaining, key=lambda u: (len(adjacency[u] & (remaining | keep)), id_of(u)))
        order.append(v)
        neighbors = adjacency[v] & (remaining | keep)
        for x in neighbors:
            adjacency[x].discard(v)
            adjacency[x].update(neighbors - {x})
        remaining.discard(v)
    return order


def elimination_order(net: Network, keep: tuple[str, ...] = ()) -> list[str]:
    """Min-degree order over the moralized graph of the unobserved variables."""
    reduced = _evidence_reduced_factors(net)
    keep_idx = {net.var_index[vid] for vid in keep}
    order = _min_degree_order([f.vars for f in reduced], keep_idx, lambda v: net.var_ids[v])
    return [net.var_ids[v] for v in order]


def _evidence_reduced_factors(net: Network) -> list[Factor]:
    out = []
    for factor in net.cpt_factors:
        for qid, value in net.evidence.items():
            v = net.var_index[qid]
            if v in factor.vars:
                factor = _reduce(factor, v, value)
        out.append(factor)
    return out


def _eliminate(factors: list[Factor], order: list[int], budget_entries: int) -> list[Factor]:
    for v in order:
        related = [f for f in factors if v in f.vars]
        if not related:
            continue
        prod = related[0]
        for f in related[1:]:
            prod = _product(prod, f, budget_entries)
        marg = _marginalize(prod, v)
        if marg.table.size:
            peak = marg.table.max()
            if peak > 0.0:
                marg = Factor(vars=marg.vars, table=marg.table / peak)
        factors = [f for f in factors if v not in f.vars]
        factors.append(marg)
    return factors


def _query_one(net: Network, reduced: list[Factor], target: int) -> float:
    """P(target = 1 | evidence) by variable elimination on the relevant part."""
    evidence_idx = [net.var_index[qid] for qid in net.evidence]

    # Ancestral closure of {target} + evidence: barren descendants sum to 1
    # and can be dropped without changing the conditional.
    closure: set[int] = set()
    stack = [target] + evidence_idx
    while stack:
        v = stack.pop()
        if v in closure:
            continue
        closure.add(v)
        stack.extend(net.var_index[p] for p in net.parents[net.var_ids[v]])

    # Factors whose child variable is inside the closure, evidence vars
    # already reduced out.  net.cpt_factors and reduced run in the same
    # (id-sorted) order.
    scoped = [
        f
        for f, original_child in zip(reduced, sorted(net.var_ids))
        if net.var_index[original_child] in closure
    ]

    # Restrict to the connected component of the target: disconnected
    # evidence only contributes a constant that normalization cancels.
    component: set[int] = {target}
    changed = True
    while changed:
        changed = False
        for f in scoped:
            if f.vars and component.intersection(f.vars) and not component.issuperset(f.vars):
                component.update(f.vars)
                changed = True
    live = [f for f in scoped if (not f.vars) or component.issuperset(f.vars)]
    live = [f for f in live if f.vars]  # scalar factors cancel in normalization

    order = _min_degree_order(
        [f.vars for f in live], {target}, lambda v: net.var_ids[v]
    )
    remaining = _eliminate(live, order, net.budget_entries)

    result = None
    for f in remaining:
        result = f if result is None else _product(result, f, net.budget_entries)
    if result is None or result.vars != (target,):
        raise ModelError(f"elimination left unexpected scope for {net.var_ids[target]!r}")
    p0, p1 = float(result.table[0]), float(result.table[1])
    total = p0 + p1
    if total <= 0.0:
        raise ModelError(
            f"evidence has probability zero; posterior of {net.var_ids[target]!r} undefined"
        )
    return p1 / total


def posteriors(net: Network) -> dict[str, float]:
    """Exact P(concept = 1 | evidence) for every concept in the map."""
    reduced = _evidence_reduced_factors(net)
    return {
        cid: _query_one(net, reduced, net.var_index[cid])
        for cid in net.concept_map.nodes
    }


def enumerate_oracle(net: Network) -> dict[str, float]:
    """Posterior marginals by summing the full joint (test oracle).

    Independent of the elimination path: builds the complete 2^n joint with
    NumPy broadcasting and reduces it per concept.
    """
    n = net.variable_count
    if n > ORACLE_MAX_VARS:
        raise ModelError(f"enumeration oracle limited to {ORACLE_MAX_VARS} variables, got {n}")
    joint = np.ones((2,) * n, dtype=np.float64)
    for factor in _evidence_reduced_factors(net):
        shape = [1] * n
        for v in factor.vars:
            shape[v] = 2
        joint = joint * factor.table.reshape(shape)
    total = joint.sum()
    if total <= 0.0:
        raise ModelError("evidence has probability zero")
    out: dict[str, float] = {}
    for cid in net.concept_map.nodes:
        axis = net.var_index[cid]
        others = tuple(i for i in range(n) if i != axis)
        marginal = joint.sum(axis=others) if others else joint
        out[cid] = float(marginal[1] / (marginal[0] + marginal[1]))
    return out


def dump_network(net: Network) -> dict:
    """JSON-ready debug dump: variables, factor scopes, evidence."""
    return {
        "variables": [
            {"id": vid, "kind": net.var_kind[vid], "parents": list(net.parents[vid])}
            for vid in net.var_ids
        ],
        "factors": [
            {"scope": [net.var_ids[v] for v in f.vars], "entries": f.table.tolist()}
            for f in net.cpt_factors
        ],
        "evidence": dict(net.evidence),
        "strategy": net.strategy,
    }
