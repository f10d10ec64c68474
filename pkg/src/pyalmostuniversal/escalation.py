"""Escalations and escalator trees.

An escalation of a form Q by a number t is a form of one more dimension whose Gram
matrix extends the Gram matrix A of Q by a border row b and the corner entry t. It is
positive definite exactly when bᵀ·A⁻¹·b < t, or equivalently bᵀ·adj(A)·b < t·D, so that
the border rows are the lattice vectors of the adjugate form below t·D.

Usage example:

  tree = escalate_tree(ExceptionTarget.of(5), max_dim=3)
  [node.truant for node in tree.level(3)]  # [10, 13, 13, 13, 14, 20] (in some order)
"""

import dataclasses
import json
import logging
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Any

from pyalmostuniversal.enumeration import is_represented, iter_blocks, truant
from pyalmostuniversal.equivalence import dedup
from pyalmostuniversal.forms import ExceptionTarget, QuadraticForm, reduce_form
from pyalmostuniversal.settings import Settings

__all__ = [
    "escalations",
    "NodeStatus",
    "EscalationNode",
    "EscalatorTree",
    "escalate_tree",
]

logger = logging.getLogger(__name__)


def escalations(form: QuadraticForm, t: int) -> list[QuadraticForm]:
    """
    Return all escalations of a form by a number.

    Args:
        form: The form.
        t: The new diagonal entry, usually the truant of the form.

    Returns:
        The positive definite forms with leading principal submatrix A and corner
        entry t, ordered lexicographically by their border rows.
    """
    if t < 1:
        raise ValueError("Forms can only be escalated by a positive integer.")
    n = form.dim
    if n == 0:
        return [QuadraticForm.diagonal(t)]
    adjugate = QuadraticForm._unchecked(form.adjugate)
    bound = t * form.determinant - 1
    borders: list[tuple[int, ...]] = []
    for values, vectors in iter_blocks(adjugate, bound, with_vectors=True):
        assert vectors is not None
        borders.extend(tuple(v) for v in vectors.tolist())
    borders.sort()
    return [form.escalate(border, t) for border in borders]


class NodeStatus(str, Enum):
    """
    The status of a node in an escalator tree.

    There are four possible status values:

    1. Escalated: The node has a truant and has been escalated by it.
    2. Candidate: The node represents every number up to the truant cap outside the
       target.
    3. Terminal: The node has a truant, but has reached the maximum dimension.
    4. Pruned: The node represents an element of the target.
    """

    ESCALATED = "escalated"
    CANDIDATE = "candidate"
    TERMINAL = "terminal"
    PRUNED = "pruned"


@dataclasses.dataclass
class EscalationNode:
    """
    A node of an escalator tree.

    Attributes:
        index: The position of the node in the tree.
        form: The form. Unless the node is the root, its leading principal submatrix is
            the Gram matrix of the parent form.
        target: The prescribed exceptions.
        truant: The truant of the form, or None if there is none up to the cap. Pruned
            nodes have no truant.
        parent: The parent node, or None for the root.
        status: The status of the node.
    """

    index: int
    form: QuadraticForm
    target: ExceptionTarget
    truant: int | None
    parent: "EscalationNode | None" = dataclasses.field(repr=False, compare=False)
    status: NodeStatus = NodeStatus.CANDIDATE

    @property
    def depth(self) -> int:
        """The depth of the node, which is the dimension of its form."""
        return self.form.dim

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON-serializable representation of the node."""
        return {
            "index": self.index,
            "parent": self.parent.index if self.parent else None,
            "dim": self.form.dim,
            "gram": [list(row) for row in self.form.gram],
            "canonical": [list(row) for row in reduce_form(self.form).form.gram],
            "target": list(self.target),
            "truant": self.truant,
            "status": self.status.value,
        }


class EscalatorTree:
    """
    An escalator tree for a set of prescribed exceptions.

    The nodes are stored in breadth-first order. The nodes of every level, apart from
    the pruned ones, are pairwise inequivalent.
    """

    def __init__(self, target: ExceptionTarget, max_dim: int, truant_cap: int):
        """
        Initialize the tree.

        Args:
            target: The prescribed exceptions.
            max_dim: The largest dimension of the tree's forms.
            truant_cap: The cap used for the truant search.
        """
        self.target = target
        self.max_dim = max_dim
        self.truant_cap = truant_cap
        self.nodes: list[EscalationNode] = []

    def add(
        self,
        form: QuadraticForm,
        truant: int | None,
        parent: EscalationNode | None,
        status: NodeStatus,
    ) -> EscalationNode:
        """Add a node to the tree and return it."""
        node = EscalationNode(len(self.nodes), form, self.target, truant, parent, status)
        self.nodes.append(node)
        return node

    def __iter__(self) -> Iterator[EscalationNode]:
        return iter(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def level(
        self, dim: int, include_pruned: bool = False
    ) -> list[EscalationNode]:
        """
        Return the nodes of a given dimension.

        Args:
            dim: The dimension.
            include_pruned: Whether to include the pruned nodes.

        Returns:
            The nodes, in tree order.
        """
        return [
            node
            for node in self.nodes
            if node.depth == dim
            and (include_pruned or node.status != NodeStatus.PRUNED)
        ]

    def with_status(self, status: NodeStatus) -> list[EscalationNode]:
        """Return the nodes with the given status."""
        return [node for node in self.nodes if node.status == status]

    @property
    def candidates(self) -> list[EscalationNode]:
        """The nodes without a truant up to the cap."""
        return self.with_status(NodeStatus.CANDIDATE)

    def truants(self) -> set[int]:
        """Return the set of all truants in the tree."""
        return {node.truant for node in self.nodes if node.truant is not None}

    def children(self, node: EscalationNode) -> list[EscalationNode]:
        """Return the children of a node."""
        return [other for other in self.nodes if other.parent is node]

    def to_json_lines(self) -> str:
        """Return the tree as JSON lines, one node per line."""
        return "".join(json.dumps(node.to_dict()) + "\n" for node in self.nodes)

    def write_json_lines(self, path: Path | str) -> None:
        """Write the tree as JSON lines to a file."""
        Path(path).write_text(self.to_json_lines())


def _parallel_map(function: Any, items: Sequence[Any]) -> list[Any]:
    threads = Settings.get_instance().threads
    if threads == 1 or len(items) < 2:
        return [function(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(function, items))


def escalate_tree(
    target: ExceptionTarget,
    max_dim: int | None = None,
    truant_cap: int | None = None,
    root: QuadraticForm | None = None,
) -> EscalatorTree:
    """
    Build the escalator tree for a set of prescribed exceptions.

    Starting from the root (by default the trivial lattice), every form with a truant is
    escalated by it. Escalations representing an element of the target are pruned, and
    the remaining escalations of a level are reduced to one form per equivalence class
    before their truants are computed.

    Args:
        target: The prescribed exceptions.
        max_dim: The largest dimension. The default is the configured maximum.
        truant_cap: The truant search cap. The default is the configured cap.
        root: The form to start from.

    Returns:
        The escalator tree.
    """
    settings = Settings.get_instance()
    if max_dim is None:
        max_dim = settings.max_dim
    if truant_cap is None:
        truant_cap = settings.truant_cap
    if root is None:
        root = QuadraticForm.trivial()
    if not root.dim <= max_dim <= settings.max_dim:
        raise ValueError(
            f"The maximum dimension must be between {root.dim} and {settings.max_dim}."
        )

    tree = EscalatorTree(target, max_dim, truant_cap)

    def status_for(t: int | None, dim: int) -> NodeStatus:
        if t is None:
            return NodeStatus.CANDIDATE
        return NodeStatus.TERMINAL if dim == max_dim else NodeStatus.ESCALATED

    if any(is_represented(root, s) for s in target):
        tree.add(root, None, None, NodeStatus.PRUNED)
        return tree
    root_truant = truant(root, target, truant_cap)
    frontier = [tree.add(root, root_truant, None, status_for(root_truant, root.dim))]

    for dim in range(root.dim + 1, max_dim + 1):
        parents: dict[QuadraticForm, EscalationNode] = {}
        for node in frontier:
            if node.status != NodeStatus.ESCALATED:
                continue
            assert node.truant is not None
            raw = escalations(node.form, node.truant)
            represents = _parallel_map(
                lambda f: any(is_represented(f, s) for s in target), raw
            )
            for form, pruned in zip(raw, represents):
                if pruned:
                    tree.add(form, None, node, NodeStatus.PRUNED)
                else:
                    parents.setdefault(form, node)

        classes = dedup(list(parents))
        truants = _parallel_map(lambda f: truant(f, target, truant_cap), classes)
        frontier = [
            tree.add(form, t, parents[form], status_for(t, dim))
            for form, t in zip(classes, truants)
        ]
        logger.info(
            "Dimension %d: %d classes, %d candidates",
            dim,
            len(frontier),
            sum(node.status == NodeStatus.CANDIDATE for node in frontier),
        )
        if not frontier:
            break
    return tree

