"""Classification of quaternary forms and the search for excepted pairs.

The quaternary forms left over by an escalation fall into three types:

* Type A forms except finitely many numbers.
* Type B forms have no local obstructions, but except infinitely many numbers because
  of unbounded divisibility by an anisotropic prime p. The exceptions then lie in
  families F_k = {k·p^j}.
* Type C forms have local obstructions.

Usage example:

  classify(QuadraticForm.diagonal(1, 2, 7, 13)).kind  # FormType.A
  classify(QuadraticForm.diagonal(1, 1, 7, 7)).kind  # FormType.B
  verify_pair(QuadraticForm.diagonal(1, 1, 2, 22), 14, 78)  # True
"""

import dataclasses
import itertools
import logging
from collections.abc import Iterable, Sequence
from enum import Enum
from typing import Any

import numpy as np

from pyalmostuniversal.densities import anisotropic_primes, local_obstructions
from pyalmostuniversal.enumeration import is_represented, represented_up_to
from pyalmostuniversal.equivalence import dedup
from pyalmostuniversal.escalation import NodeStatus, escalate_tree, escalations
from pyalmostuniversal.exceptions import FamilyEscapeError, ResourceLimitError
from pyalmostuniversal.forms import ExceptionTarget, QuadraticForm
from pyalmostuniversal.settings import Settings

__all__ = [
    "FormType",
    "Family",
    "FormClassification",
    "SubformSwitch",
    "PairStatus",
    "PairVerdict",
    "EXCEPTED_PAIRS",
    "CRITICAL_NUMBERS",
    "exceptions_up_to",
    "detect_families",
    "classify",
    "higher_escalate_typeA",
    "higher_escalate_typeB",
    "subform_switch",
    "reference_dimension",
    "pair_partners",
    "search_pair",
    "enumerate_pairs",
    "verify_pair",
]

logger = logging.getLogger(__name__)

DEFAULT_CLASSIFY_BOUND = 10_000

# Families are only reported if this many of their members are exceptions.
_MIN_CHAIN = 3

CRITICAL_NUMBERS = (1, 2, 3, 5, 6, 7, 10, 14, 15)

_PAIRS_BY_DIM = {
    (1, 4): (2, 3, 4, 5, 6, 7, 9, 10, 11, 13, 14, 15, 17, 19, 21, 23, 25, 26, 30, 41),
    (1, 5): (55,),
    (2, 4): (3, 5, 6, 8, 10, 11, 15, 18, 22, 30, 38),
    (2, 5): (14, 50),
    (3, 4): (6, 7, 11, 12, 19, 21, 27, 30, 35, 39),
    (5, 4): (7, 10, 13, 14, 20, 21, 29, 30, 35),
    (5, 5): (37, 42, 125),
    (6, 4): (15,),
    (6, 5): (54,),
    (7, 4): (10, 15, 23, 28, 31, 39, 55),
    (10, 4): (15, 26, 40, 58),
    (10, 5): (250,),
    (14, 4): (30, 56, 78),
}

# The sets {m, n} of exceptions of positive definite integral forms, with the minimum
# number of variables of such a form.
EXCEPTED_PAIRS: tuple[tuple[int, int, int], ...] = tuple(
    sorted(
        (m, n, dim) for (m, dim), partners in _PAIRS_BY_DIM.items() for n in partners
    )
)


class FormType(str, Enum):
    """The type of a quaternary form."""

    A = "A"
    B = "B"
    C = "C"


@dataclasses.dataclass(frozen=True)
class Family:
    """
    A family F_k = {k·step^j : j ≥ 0} of exceptions.

    Attributes:
        seed: The smallest member k.
        prime: The anisotropic prime p.
        step: The ratio of consecutive members, p or p².
    """

    seed: int
    prime: int
    step: int

    def __contains__(self, m: object) -> bool:
        if not isinstance(m, int) or m < self.seed or m % self.seed:
            return False
        q = m // self.seed
        while q % self.step == 0:
            q //= self.step
        return q == 1

    def members(self, bound: int) -> list[int]:
        """Return the members up to a bound."""
        result = []
        m = self.seed
        while m <= bound:
            result.append(m)
            m *= self.step
        return result


@dataclasses.dataclass
class FormClassification:
    """
    The type of a form together with the evidence for it.

    Attributes:
        form: The form.
        kind: The type.
        exceptions: The exceptions up to the bound (not computed for type C).
        bound: The bound up to which exceptions were computed.
        prime: The anisotropic prime of the families (type B only).
        families: The families of exceptions (type B only).
        obstruction: A pair (p, m) of a prime and a number m which is not represented
            over the p-adic integers (type C only).
    """

    form: QuadraticForm
    kind: FormType
    exceptions: list[int]
    bound: int
    prime: int | None = None
    families: list[Family] = dataclasses.field(default_factory=list)
    obstruction: tuple[int, int] | None = None

    @property
    def seeds(self) -> list[int]:
        """The seeds of the families."""
        return [family.seed for family in self.families]

    def outside_families(self) -> list[int]:
        """Return the exceptions which belong to no family."""
        return [
            m
            for m in self.exceptions
            if not any(m in family for family in self.families)
        ]

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON-serializable representation of the classification."""
        return {
            "form": self.form.to_dict(),
            "kind": self.kind.value,
            "exceptions": self.exceptions,
            "bound": self.bound,
            "prime": self.prime,
            "families": [dataclasses.asdict(family) for family in self.families],
            "obstruction": list(self.obstruction) if self.obstruction else None,
        }


def exceptions_up_to(form: QuadraticForm, bound: int) -> list[int]:
    """Return the positive integers up to a bound which a form does not represent."""
    bits = represented_up_to(form, bound)
    return (np.flatnonzero(~bits[1:]) + 1).tolist()


def detect_families(exceptions: Iterable[int], p: int, bound: int) -> list[Family]:
    """
    Find the families of exceptions for an anisotropic prime.

    A seed k is an exception such that k/p is no exception, and all members k·p^j up to
    the bound are exceptions (at least three of them). Chains with the step p² are
    only reported for seeds which do not start a chain with the step p.

    Args:
        exceptions: The exceptions up to the bound.
        p: The anisotropic prime.
        bound: The bound.

    Returns:
        The families, sorted by seed.
    """
    found = set(exceptions)
    families: dict[int, Family] = {}
    for step in (p, p * p):
        for k in sorted(found):
            if any(k in f for f in families.values()) or (
                k % step == 0 and k // step in found
            ):
                continue
            family = Family(k, p, step)
            members = family.members(bound)
            if len(members) >= _MIN_CHAIN and all(m in found for m in members):
                families[k] = family
    return [families[k] for k in sorted(families)]


def classify(form: QuadraticForm, bound: int | None = None) -> FormClassification:
    """
    Classify a form as type A, B or C.

    Args:
        form: A form of dimension at least 3, usually quaternary.
        bound: The bound for computing exceptions. The default is 10⁴.

    Returns:
        The classification.
    """
    if bound is None:
        bound = DEFAULT_CLASSIFY_BOUND
    obstructions = local_obstructions(form)
    if obstructions:
        logger.debug("%s is of type C: %s", form, obstructions[0])
        return FormClassification(
            form, FormType.C, [], bound, obstruction=obstructions[0]
        )

    exceptions = exceptions_up_to(form, bound)
    for p in sorted(anisotropic_primes(form)):
        families = detect_families(exceptions, p, bound)
        if families:
            logger.debug("%s is of type B for p = %d", form, p)
            return FormClassification(
                form, FormType.B, exceptions, bound, prime=p, families=families
            )
    logger.debug("%s is of type A with exceptions %s", form, exceptions)
    return FormClassification(form, FormType.A, exceptions, bound)


class PairStatus(str, Enum):
    """
    The outcome of the search for a form excepting exactly a pair.

    There are three possible status values:

    1. Found: A witness form was found and verified.
    2. Impossible: Every branch of the escalation represents m or n.
    3. Exhausted: The dimension cap was reached with truants left.
    """

    FOUND = "found"
    IMPOSSIBLE = "impossible"
    EXHAUSTED = "exhausted"


@dataclasses.dataclass
class PairVerdict:
    """
    The verdict of the search for a pair {m, n}.

    Attributes:
        m: The smaller exception.
        n: The larger exception.
        status: The outcome.
        witness: A form representing every number up to the bound apart from m and n.
        bound: The bound up to which the witness was verified.
        methods: The steps of the search which led to the verdict.
        reference_dim: The minimum dimension in the table of excepted pairs, if listed.
    """

    m: int
    n: int
    status: PairStatus
    witness: QuadraticForm | None = None
    bound: int | None = None
    methods: list[str] = dataclasses.field(default_factory=list)
    reference_dim: int | None = None

    @property
    def dim(self) -> int | None:
        """The dimension of the witness."""
        return self.witness.dim if self.witness else None

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON-serializable representation of the verdict."""
        return {
            "pair": [self.m, self.n],
            "status": self.status.value,
            "witness": [list(row) for row in self.witness.gram]
            if self.witness
            else None,
            "dim": self.dim,
            "bound": self.bound,
            "methods": self.methods,
            "reference_dim": self.reference_dim,
        }


def reference_dimension(m: int, n: int) -> int | None:
    """Return the minimum dimension listed for the pair {m, n}, if any."""
    m, n = sorted((m, n))
    for a, b, dim in EXCEPTED_PAIRS:
        if (a, b) == (m, n):
            return dim
    return None


def verify_pair(
    form: QuadraticForm, m: int, n: int, bound: int | None = None
) -> bool:
    """
    Return whether a form excepts exactly m and n among the numbers up to a bound.

    Args:
        form: The form.
        m: An exception.
        n: The other exception.
        bound: The bound. The default is the configured verification bound.
    """
    if bound is None:
        bound = Settings.get_instance().verification_bound
    bound = max(bound, m, n)
    return exceptions_up_to(form, bound) == sorted({m, n})


def higher_escalate_typeA(
    form: QuadraticForm,
    m: int,
    n: int,
    max_dim: int | None = None,
    truant_cap: int | None = None,
) -> PairVerdict:
    """
    Escalate a form by its truants until it excepts at most the pair {m, n}.

    Escalations representing m or n are discarded. The search ends when a form without
    truant up to the cap is found, when all branches are discarded, or at the maximum
    dimension.

    Args:
        form: A form representing neither m nor n.
        m: An exception.
        n: The other exception.
        max_dim: The maximum dimension. The default is the configured maximum.
        truant_cap: The truant search cap.

    Returns:
        The verdict. Found verdicts are not verified beyond the truant cap.
    """
    target = ExceptionTarget.of(m, n)
    tree = escalate_tree(target, max_dim=max_dim, truant_cap=truant_cap, root=form)
    candidates = sorted(tree.candidates, key=lambda node: (node.depth, node.index))
    a, b = sorted((m, n))
    methods = [f"escalate from dim {form.dim}"]
    if candidates:
        return PairVerdict(a, b, PairStatus.FOUND, candidates[0].form, methods=methods)
    if tree.with_status(NodeStatus.TERMINAL):
        return PairVerdict(a, b, PairStatus.EXHAUSTED, methods=methods)
    return PairVerdict(a, b, PairStatus.IMPOSSIBLE, methods=methods)


def higher_escalate_typeB(
    classification: FormClassification, bound: int | None = None
) -> list[FormClassification]:
    """
    Remove the families of a type B form by escalating by their seeds.

    The form is escalated by every seed k. If an escalation still excepts a member of
    F_k, it is escalated by k·p as well. The resulting forms are classified again, and
    usually have finitely many exceptions.

    Exceptions outside the families must form a finite set. Up to the bound this can
    only be told for exceptions m with m·p² ≤ bound, as a family needs three members
    up to the bound. Larger exceptions outside the families are escapes.

    Args:
        classification: The classification of a type B form.
        bound: The bound for the exceptions of the escalations. The default is the
            bound of the classification.

    Returns:
        The classifications of the escalated forms.

    Raises:
        FamilyEscapeError: There are escapes, an escalated form still excepts members
            of the family it was escalated for, or it has families of its own.
    """
    if classification.kind != FormType.B:
        raise ValueError("Only forms of type B can be handled.")
    assert classification.prime is not None
    if bound is None:
        bound = classification.bound
    p = classification.prime
    form = classification.form
    max_dim = Settings.get_instance().max_dim

    escaped = [
        m
        for m in classification.outside_families()
        if m * p * p > classification.bound
    ]
    if escaped:
        raise FamilyEscapeError(
            f"Exceptions of {form} lie outside its families for p = {p}.", escaped
        )

    results: list[FormClassification] = []
    surviving: set[int] = set()
    for family in classification.families:
        k = family.seed
        for escalated in dedup(escalations(form, k)):
            missing = _excepted_members(escalated, family, bound)
            if missing and escalated.dim < max_dim:
                forms = dedup(escalations(escalated, k * p))
            else:
                forms = [escalated]
            for f in forms:
                surviving.update(_excepted_members(f, family, bound))
                result = classify(f, bound)
                if result.kind == FormType.B:
                    surviving.update(
                        m for fam in result.families for m in fam.members(bound)
                    )
                results.append(result)

    if surviving:
        raise FamilyEscapeError(
            f"Families of exceptions of {form} survive the escalation.",
            sorted(surviving),
        )
    logger.info("%d escalations of %s by its family seeds", len(results), form)
    return results


def _excepted_members(form: QuadraticForm, family: Family, bound: int) -> list[int]:
    bits = represented_up_to(form, bound)
    return [m for m in family.members(bound) if not bits[m]]


@dataclasses.dataclass(frozen=True)
class SubformSwitch:
    """
    A quaternary sublattice of a quinary form.

    Attributes:
        parent: The quinary form.
        basis: The sublattice basis, as rows in the coordinates of the parent.
        form: The restriction of the parent to the sublattice.
    """

    parent: QuadraticForm
    basis: tuple[tuple[int, ...], ...]
    form: QuadraticForm


def _sublattice_bases(box: int) -> Iterable[tuple[tuple[int, ...], ...]]:
    coefficients = sorted(
        itertools.product(range(-box, box + 1), repeat=4),
        key=lambda c: (sum(abs(e) for e in c), tuple(-e for e in c)),
    )
    for omitted in range(4, -1, -1):
        kept = [i for i in range(5) if i != omitted]
        for c in coefficients:
            rows = []
            for i, coefficient in zip(kept, c):
                row = [0] * 5
                row[i] = 1
                row[omitted] = coefficient
                rows.append(tuple(row))
            yield tuple(rows)


def subform_switch(form: QuadraticForm, box: int = 2) -> SubformSwitch | None:
    """
    Find a quaternary sublattice of a quinary form without local obstructions.

    The sublattices are spanned by four of the five basis vectors, each shifted by a
    multiple c_i of the omitted one with |c_i| ≤ box. Sublattices closer to the
    principal subforms are tried first.

    Args:
        form: A quinary form.
        box: The bound for the coefficients.

    Returns:
        The sublattice, or None if every sublattice has local obstructions.
    """
    if form.dim != 5:
        raise ValueError("The subform switch is defined for quinary forms.")
    seen: set[tuple[int, ...]] = set()
    for basis in _sublattice_bases(box):
        subform = form.transform(basis)
        if subform.key() in seen:
            continue
        seen.add(subform.key())
        if not local_obstructions(subform):
            logger.debug("Subform %s of %s has no local obstructions", subform, form)
            return SubformSwitch(form, basis, subform)
    logger.warning("Every sublattice of %s in the box has local obstructions", form)
    return None


def pair_partners(m: int, truant_cap: int | None = None) -> list[int]:
    """
    Return the candidates n for pairs {m, n}.

    The candidates are the truants larger than m of the escalator tree of {m} up to
    dimension 4. For m = 6 the partners n ≤ 15 are used instead.
    """
    if m == 6:
        return list(range(7, 16))
    tree = escalate_tree(ExceptionTarget.of(m), max_dim=4, truant_cap=truant_cap)
    return sorted(t for t in tree.truants() if t > m)


def _escalate_type_b(
    classification: FormClassification,
    m: int,
    n: int,
    max_dim: int,
    truant_cap: int | None,
) -> PairVerdict:
    methods = [f"remove the families with seeds {classification.seeds}"]
    status = PairStatus.IMPOSSIBLE
    for result in higher_escalate_typeB(classification):
        form = result.form
        if form.dim > max_dim or is_represented(form, m) or is_represented(form, n):
            continue
        sub = higher_escalate_typeA(form, m, n, max_dim, truant_cap)
        sub.methods = methods + [f"type {result.kind.value} escalation"] + sub.methods
        if sub.status == PairStatus.FOUND:
            return sub
        if sub.status == PairStatus.EXHAUSTED:
            status = PairStatus.EXHAUSTED
    return PairVerdict(m, n, status, methods=methods)


def _switch_subform(verdict: PairVerdict, bound: int) -> PairVerdict:
    assert verdict.witness is not None
    switch = subform_switch(verdict.witness)
    if switch is None:
        verdict.methods.append("subform switch failed")
        return PairVerdict(
            verdict.m, verdict.n, PairStatus.EXHAUSTED, methods=verdict.methods
        )
    subform = classify(switch.form, bound)
    verdict.methods.append(
        f"subform switch: {switch.form} of type {subform.kind.value}"
    )
    if subform.kind == FormType.B:
        higher_escalate_typeB(subform)
        verdict.methods.append(f"subform families with seeds {subform.seeds} removed")
    else:
        verdict.methods.append(
            f"subform exceptions up to {subform.bound}: {subform.exceptions}"
        )
    return verdict


def _escalate_quaternary(
    form: QuadraticForm,
    m: int,
    n: int,
    max_dim: int,
    truant_cap: int | None,
    bound: int,
) -> PairVerdict:
    # Type A forms are escalated by their truants and type B forms by their family
    # seeds. Quinary witnesses from type C forms need a subform switch.
    classification = classify(form, bound)
    methods = [f"type {classification.kind.value} quaternary {form}"]
    if classification.kind == FormType.B:
        verdict = _escalate_type_b(classification, m, n, max_dim, truant_cap)
    else:
        verdict = higher_escalate_typeA(form, m, n, max_dim, truant_cap)
        if (
            classification.kind == FormType.C
            and verdict.status == PairStatus.FOUND
            and verdict.dim == 5
        ):
            verdict = _switch_subform(verdict, bound)
    verdict.methods = methods + verdict.methods
    return verdict


def search_pair(
    m: int,
    n: int,
    max_dim: int = 5,
    truant_cap: int | None = None,
    bound: int | None = None,
) -> PairVerdict:
    """
    Search for a form which excepts exactly m and n.

    The escalator tree of {m, n} is built up to dimension 4. If it has no candidate,
    every terminal quaternary form is classified. Type A and type C forms are escalated
    by their truants, and quinary witnesses descending from a type C form need a
    quaternary subform without local obstructions. Type B forms are first escalated by
    their family seeds.

    Args:
        m: An exception.
        n: The other exception.
        max_dim: The maximum dimension.
        truant_cap: The truant search cap.
        bound: The verification bound for the witness.

    Returns:
        The verdict.

    Raises:
        FamilyEscapeError: The exceptions of a type B form escape its families.
    """
    if bound is None:
        bound = Settings.get_instance().verification_bound
    a, b = sorted((m, n))
    target = ExceptionTarget.of(a, b)
    tree = escalate_tree(target, max_dim=min(4, max_dim), truant_cap=truant_cap)
    methods = ["escalate to dim 4"]
    verdict = None
    candidates = sorted(tree.candidates, key=lambda node: (node.depth, node.index))
    if candidates:
        verdict = PairVerdict(a, b, PairStatus.FOUND, candidates[0].form)
    elif max_dim > 4:
        status = PairStatus.IMPOSSIBLE
        classify_bound = min(bound, DEFAULT_CLASSIFY_BOUND)
        for node in tree.with_status(NodeStatus.TERMINAL):
            sub = _escalate_quaternary(
                node.form, a, b, max_dim, truant_cap, classify_bound
            )
            if sub.status == PairStatus.FOUND:
                verdict = sub
                break
            if sub.status == PairStatus.EXHAUSTED:
                status = PairStatus.EXHAUSTED
                methods.extend(sub.methods)
        if verdict is None:
            verdict = PairVerdict(a, b, status)
    else:
        terminal = bool(tree.with_status(NodeStatus.TERMINAL))
        status = PairStatus.EXHAUSTED if terminal else PairStatus.IMPOSSIBLE
        verdict = PairVerdict(a, b, status)

    verdict.methods = methods + verdict.methods
    verdict.reference_dim = reference_dimension(a, b)
    if verdict.witness is not None:
        if verify_pair(verdict.witness, a, b, bound):
            verdict.bound = bound
            verdict.methods.append(f"verified up to {bound}")
        else:
            logger.warning("The witness for {%d, %d} fails verification", a, b)
            verdict.status = PairStatus.EXHAUSTED
            verdict.methods.append(f"verification up to {bound} failed")
    return verdict


def enumerate_pairs(
    critical: Sequence[int] = CRITICAL_NUMBERS,
    max_dim: int = 5,
    truant_cap: int | None = None,
    bound: int | None = None,
) -> list[PairVerdict]:
    """
    Search for all pairs {m, n} of exceptions with m critical.

    Args:
        critical: The smaller exceptions m.
        max_dim: The maximum dimension of witness forms.
        truant_cap: The truant search cap.
        bound: The verification bound for the witnesses.

    Returns:
        The verdicts of the pairs which were found or whose search hit a cap, sorted by
        m and n. Pairs for which every branch represents m or n are left out.
        Searches stopped by a family escape are reported as exhausted.
    """
    verdicts = []
    for m in critical:
        partners = pair_partners(m, truant_cap)
        logger.info("Critical number %d: %d candidate partners", m, len(partners))
        for n in partners:
            try:
                verdict = search_pair(m, n, max_dim, truant_cap, bound)
            except ResourceLimitError as e:
                verdict = PairVerdict(
                    m,
                    n,
                    PairStatus.EXHAUSTED,
                    methods=[f"resource limit: {e}"],
                    reference_dim=reference_dimension(m, n),
                )
            except FamilyEscapeError as e:
                logger.error("Pair {%d, %d} needs a manual review: %s", m, n, e)
                verdict = PairVerdict(
                    m,
                    n,
                    PairStatus.EXHAUSTED,
                    methods=[f"manual review, family escapes {e.numbers}"],
                    reference_dim=reference_dimension(m, n),
                )
            logger.info("Pair {%d, %d}: %s", m, n, verdict.status.value)
            if verdict.status != PairStatus.IMPOSSIBLE:
                verdicts.append(verdict)
    verdicts.sort(key=lambda v: (v.m, v.n))
    return verdicts
