"""Course concept tree: weighted nodes, validation, and additive CPTs.

A course is a tree of concepts.  The root is the course itself, leaves are
the fine-grained topics a question can address, and every edge carries the
weight of the child inside its parent.  Weights under one parent sum to 1.

A non-leaf's conditional probability table is deterministic and additive:
P(node = 1 | children) is the sum of the weights of the children assigned 1.
Wide nodes are factorized into a chain of accumulator variables so no table
ever exceeds 2**(fan_in_max+1) entries; the chain reproduces the additive
marginal exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from studymap.errors import DocumentParseError, ModelError

WEIGHT_SUM_TOL = 1e-9
DEFAULT_PRIOR = 0.5
DEFAULT_FAN_IN_MAX = 12

# Synthetic accumulator ids use this separator; user ids may not contain it.
ACC_SEP = "#"


@dataclass(frozen=True)
class ConceptNode:
    """One concept: id, display title, and weighted children (empty for leaves)."""

    id: str
    title: str
    children: tuple[tuple[str, float], ...] = ()
    prior: float | None = None  # leaf-only override of the map-wide prior

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def child_ids(self) -> tuple[str, ...]:
        return tuple(cid for cid, _ in self.children)


@dataclass(frozen=True)
class ConceptMap:
    """Validated concept tree.  Immutable; safe to share across threads."""

    root: str
    nodes: dict[str, ConceptNode]
    prior_leaf: float = DEFAULT_PRIOR

    def node(self, concept_id: str) -> ConceptNode:
        try:
            return self.nodes[concept_id]
        except KeyError:
            raise ModelError(f"unknown concept id {concept_id!r}") from None

    def leaf_ids(self) -> list[str]:
        return [n.id for n in self.nodes.values() if n.is_leaf]

    def leaf_prior(self, concept_id: str) -> float:
        node = self.node(concept_id)
        if not node.is_leaf:
            raise ModelError(f"{concept_id!r} is not a leaf")
        return node.prior if node.prior is not None else self.prior_leaf

    def parent_of(self, concept_id: str) -> str | None:
        for node in self.nodes.values():
            if concept_id in node.child_ids:
                return node.id
        return None

    def descendants(self, concept_id: str) -> set[str]:
        """All concepts at or below *concept_id* (inclusive)."""
        seen: set[str] = set()
        stack = [concept_id]
        while stack:
            cid = stack.pop()
            if cid in seen:
                continue
            seen.add(cid)
            stack.extend(self.node(cid).child_ids)
        return seen

    def preorder(self) -> list[str]:
        """Root-first traversal in declared child order."""
        order: list[str] = []
        stack = [self.root]
        while stack:
            cid = stack.pop()
            order.append(cid)
            stack.extend(reversed(self.node(cid).child_ids))
        return order


@dataclass(frozen=True)
class ConceptCpt:
    """Additive CPT of a non-leaf concept.

    ``table[i]`` is P(node = 1 | assignment encoded by i), where bit j of i
    (with the LAST listed parent as the least-significant bit) gives the
    value of ``parent_ids[j]``.  Index 0 is therefore the all-zeros row and
    index 2**k - 1 the all-ones row; reading the table from the top index
    down reproduces the usual textbook presentation that starts at the
    all-known assignment.
    """

    parent_ids: tuple[str, ...]
    table: tuple[float, ...]

    def entry(self, assignment: tuple[int, ...]) -> float:
        """P(node = 1 | parents = assignment), assignment in parent order."""
        if len(assignment) != len(self.parent_ids):
            raise ModelError("assignment length does not match parent count")
        idx = 0
        for bit in assignment:
            idx = (idx << 1) | (1 if bit else 0)
        return self.table[idx]


@dataclass(frozen=True)
class Violation:
    """One validation failure: the node it concerns and the rule broken."""

    node_id: str
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.node_id}: [{self.rule}] {self.message}"


def parse_concept_map(text: str) -> ConceptMap:
    """Parse and validate a concept-map document.

    The document is UTF-8 JSON:
    {"root": id, "prior_leaf": number?, "nodes": [{"id", "title",
     "children": [{"id", "weight"}], "prior": number?}]}

    Raises DocumentParseError on malformed JSON or schema problems, and
    ModelError when the structure violates a map invariant (duplicate id,
    dangling child reference, weight sum, cycle, unreachable node).
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from exc

    if not isinstance(doc, dict):
        raise DocumentParseError("document root must be a JSON object")
    for key in ("root", "nodes"):
        if key not in doc:
            raise DocumentParseError(f"missing required field {key!r}")

    prior_leaf = doc.get("prior_leaf", DEFAULT_PRIOR)
    if not isinstance(prior_leaf, (int, float)) or isinstance(prior_leaf, bool):
        raise DocumentParseError("prior_leaf must be a number")

    nodes: dict[str, ConceptNode] = {}
    for i, raw in enumerate(doc["nodes"]):
        if not isinstance(raw, dict) or "id" not in raw:
            raise DocumentParseError(f"node #{i} is not an object with an 'id'")
        nid = raw["id"]
        if not isinstance(nid, str) or not nid:
            raise DocumentParseError(f"node #{i} has a non-string or empty id")
        if ACC_SEP in nid or any(c.isspace() for c in nid):
            raise DocumentParseError(
                f"node id {nid!r} contains whitespace or the reserved character {ACC_SEP!r}"
            )
        if nid in nodes:
            raise ModelError(f"duplicate node id {nid!r}")
        children = []
        for raw_child in raw.get("children", []):
            if not isinstance(raw_child, dict) or "id" not in raw_child or "weight" not in raw_child:
                raise DocumentParseError(f"node {nid!r} has a malformed child entry")
            weight = raw_child["weight"]
            if not isinstance(weight, (int, float)) or isinstance(weight, bool):
                raise DocumentParseError(f"node {nid!r}: child weight must be a number")
            children.append((raw_child["id"], float(weight)))
        prior = raw.get("prior")
        if prior is not None and (not isinstance(prior, (int, float)) or isinstance(prior, bool)):
            raise DocumentParseError(f"node {nid!r}: prior must be a number")
        nodes[nid] = ConceptNode(
            id=nid,
            title=str(raw.get("title", nid)),
            children=tuple(children),
            prior=float(prior) if prior is not None else None,
        )

    cmap = ConceptMap(root=doc["root"], nodes=nodes, prior_leaf=float(prior_leaf))
    problems = validate(cmap)
    if problems:
        raise ModelError("; ".join(str(v) for v in problems))
    return cmap


def validate(cmap: ConceptMap) -> list[Violation]:
    """Check every map invariant.  Never raises; returns all violations found."""
    out: list[Violation] = []

    if not (0.0 < cmap.prior_leaf < 1.0):
        out.append(Violation(cmap.root, "prior-range", f"prior_leaf {cmap.prior_leaf} outside (0,1)"))

    if cmap.root not in cmap.nodes:
        out.append(Violation(cmap.root, "missing-root", "root id is not a defined node"))
        return out

    parent_count: dict[str, int] = {nid: 0 for nid in cmap.nodes}
    for node in cmap.nodes.values():
        seen_children: set[str] = set()
        total = 0.0
        for cid, weight in node.children:
            if cid in seen_children:
                out.append(Violation(node.id, "duplicate-child", f"child {cid!r} listed twice"))
            seen_children.add(cid)
            if cid not in cmap.nodes:
                out.append(Violation(node.id, "dangling-child", f"child {cid!r} is not a defined node"))
                continue
            parent_count[cid] += 1
            if weight <= 0.0:
                out.append(Violation(node.id, "nonpositive-weight", f"child {cid!r} has weight {weight}"))
            elif weight > 1.0:
                out.append(Violation(node.id, "weight-above-one", f"child {cid!r} has weight {weight}"))
            total += weight
        if node.children and not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=WEIGHT_SUM_TOL):
            out.append(
                Violation(node.id, "weight-sum", f"child weights sum to {total!r}, expected 1 within {WEIGHT_SUM_TOL}")
            )
        if node.prior is not None:
            if not node.is_leaf:
                out.append(Violation(node.id, "prior-on-aggregate", "prior overrides are leaf-only"))
            elif not (0.0 < node.prior < 1.0):
                out.append(Violation(node.id, "prior-range", f"prior {node.prior} outside (0,1)"))

    if parent_count.get(cmap.root, 0) != 0:
        out.append(Violation(cmap.root, "root-has-parent", "root appears as a child"))
    for nid, count in parent_count.items():
        if nid != cmap.root and count > 1:
            out.append(Violation(nid, "multiple-parents", f"{count} parents; the child relation must be a tree"))

    # Reachability and cycle detection via one DFS from the root.
    reached: set[str] = set()
    stack = [cmap.root]
    path: set[str] = set()

    def dfs(nid: str, trail: tuple[str, ...]) -> None:
        if nid in trail:
            out.append(Violation(nid, "cycle", " -> ".join(trail + (nid,))))
            return
        if nid in reached:
            return
        reached.add(nid)
        for cid, _ in cmap.nodes[nid].children:
            if cid in cmap.nodes:
                dfs(cid, trail + (nid,))

    dfs(cmap.root, ())
    for nid in cmap.nodes:
        if nid not in reached:
            out.append(Violation(nid, "unreachable", "not reachable from the root"))

    return out


def additive_table(weights: tuple[float, ...]) -> tuple[float, ...]:
    """2**k-entry additive table over *weights*, all-zeros row first.

    Entry i is the sum of weights whose bit is set in i (last weight = LSB),
    accumulated in listed order so results are reproducible bit for bit.
    """
    k = len(weights)
    table = []
    for idx in range(1 << k):
        total = 0.0
        for j, w in enumerate(weights):
            if idx >> (k - 1 - j) & 1:
                total += w
        table.append(total)
    return tuple(table)


def build_concept_cpt(node: ConceptNode, fan_in_max: int = DEFAULT_FAN_IN_MAX) -> ConceptCpt:
    """Additive CPT of a non-leaf *node*: each row sums the weights of the
    children assigned 1.  Rows are clamped to [0,1] only by construction
    (weights sum to 1), never renormalized.
    """
    if node.is_leaf:
        raise ModelError(f"{node.id!r} is a leaf; leaves have priors, not CPTs")
    if len(node.children) > fan_in_max:
        raise ModelError(
            f"{node.id!r} has {len(node.children)} children, above fan_in_max={fan_in_max}; "
            "factorize it first"
        )
    weights = tuple(w for _, w in node.children)
    total = sum(weights)
    if not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=WEIGHT_SUM_TOL):
        raise ModelError(f"{node.id!r}: child weights sum to {total!r}, expected 1")
    return ConceptCpt(parent_ids=node.child_ids, table=additive_table(weights))


@dataclass(frozen=True)
class Accumulator:
    """Synthetic chain variable standing in for a group of children.

    Its CPT is additive over the group with weights rescaled to sum to 1;
    the accumulator then carries the group's total weight into the next
    stage.  Composing the chain reproduces the direct additive CPT exactly:
    P(node=1 | children) stays the plain weighted sum.
    """

    id: str
    parents: tuple[tuple[str, float], ...]  # rescaled weights, sum 1
    carried_weight: float  # weight this accumulator contributes upstream


def factorize_weighted_cpt(
    node: ConceptNode, fan_in_max: int = DEFAULT_FAN_IN_MAX
) -> tuple[list[Accumulator], tuple[tuple[str, float], ...]]:
    """Rewrite a wide *node* into accumulators plus a final parent list.

    Returns (accumulators, final_parents).  When the node is already within
    the bound the accumulator list is empty and the parents are unchanged.
    Grouping folds the first fan_in_max parents into one accumulator and
    repeats, so every synthetic table has at most 2**fan_in_max rows.
    """
    if fan_in_max < 2:
        raise ModelError("fan_in_max must be at least 2")
    parents = list(node.children)
    accumulators: list[Accumulator] = []
    counter = 0
    while len(parents) > fan_in_max:
        group = parents[:fan_in_max]
        rest = parents[fan_in_max:]
        carried = sum(w for _, w in group)
        acc_id = f"{node.id}{ACC_SEP}acc{counter}"
        counter += 1
        rescaled = tuple((cid, w / carried) for cid, w in group)
        accumulators.append(Accumulator(id=acc_id, parents=rescaled, carried_weight=carried))
        parents = [(acc_id, carried)] + rest
    return accumulators, tuple(parents)


def load_concept_map(path: str) -> ConceptMap:
    with open(path, encoding="utf-8") as fh:
        return parse_concept_map(fh.read())
