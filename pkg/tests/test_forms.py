import numpy as np
import pytest

from pyalmostuniversal.exceptions import DimensionMismatchError, InvalidFormError
from pyalmostuniversal.forms import (
    ExceptionTarget,
    QuadraticForm,
    orthogonal_complement,
    reduce_form,
)


def test_halmos_invariants(halmos: QuadraticForm) -> None:
    assert halmos.dim == 4
    assert halmos.determinant == 182
    assert halmos.level == 728
    assert halmos.is_diagonal


@pytest.mark.parametrize(
    "coefficients,level",
    [((1, 1, 1, 1), 4), ((1, 3, 5, 7), 420), ((1,), 4), ((1, 1, 2, 22), 88)],
)
def test_level_of_diagonal_forms(coefficients: tuple[int, ...], level: int) -> None:
    assert QuadraticForm.diagonal(*coefficients).level == level


def test_level_of_non_diagonal_form() -> None:
    # 2x² + 2xy + 2y² is twice the norm form of the Eisenstein integers.
    assert QuadraticForm.from_rows([[2, 1], [1, 2]]).level == 6


def test_character(halmos: QuadraticForm) -> None:
    assert halmos.character(3) == -1
    assert halmos.character(5) == -1
    assert halmos.character(19) == 1
    with pytest.raises(ValueError, match="divides"):
        halmos.character(7)
    with pytest.raises(ValueError, match="not a prime"):
        halmos.character(9)


def test_trivial_form() -> None:
    trivial = QuadraticForm.trivial()

    assert trivial.dim == 0
    assert trivial.determinant == 1
    assert trivial.evaluate(()) == 0


@pytest.mark.parametrize(
    "rows,message",
    [
        ([[1, 0], [0]], "square"),
        ([[1, 1], [0, 1]], "symmetric"),
        ([[1, 2], [2, 1]], "positive definite"),
        ([[-1]], "positive definite"),
        ([[1.5]], "integers"),
    ],
)
def test_invalid_gram_matrices_are_rejected(rows: list, message: str) -> None:
    with pytest.raises(InvalidFormError, match=message):
        QuadraticForm(tuple(tuple(row) for row in rows))


def test_dimension_seven_is_rejected() -> None:
    with pytest.raises(InvalidFormError, match="not supported"):
        QuadraticForm.diagonal(*([1] * 7))


def test_evaluate(halmos: QuadraticForm) -> None:
    assert halmos.evaluate((1, 1, 1, 1)) == 23
    assert halmos.evaluate((0, 0, 0, 0)) == 0
    assert QuadraticForm.from_rows([[2, 1], [1, 2]]).evaluate((1, -1)) == 2
    with pytest.raises(DimensionMismatchError):
        halmos.evaluate((1, 2))


def test_escalate_appends_border_and_corner() -> None:
    form = QuadraticForm.diagonal(1).escalate((1,), 2)

    assert form.gram == ((1, 1), (1, 2))


def test_direct_sum_and_principal_subform(halmos: QuadraticForm) -> None:
    form = QuadraticForm.diagonal(1, 2).direct_sum(QuadraticForm.diagonal(7, 13))

    assert form == halmos
    assert halmos.principal_subform([1, 3]) == QuadraticForm.diagonal(2, 13)


def test_transform_gives_sublattice_gram(halmos: QuadraticForm) -> None:
    basis = [(1, 1, 0, 0), (0, 0, 1, 0)]
    form = halmos.transform(basis)

    assert form.gram == ((3, 0), (0, 7))


def test_reduce_form_transform_is_consistent() -> None:
    form = QuadraticForm.from_rows([[5, 7], [7, 10]])
    reduction = reduce_form(form)
    u = np.array(reduction.transform)

    assert (u @ form.matrix @ u.T).tolist() == [list(r) for r in reduction.form.gram]
    assert abs(round(np.linalg.det(u))) == 1
    assert reduction.form.gram == ((1, 0), (0, 1))


def test_orthogonal_complement(halmos: QuadraticForm) -> None:
    complement, basis = orthogonal_complement(halmos, (1, 0, 0, 0))

    assert complement == QuadraticForm.diagonal(2, 7, 13)
    for row in basis:
        assert halmos.inner_product(row, (1, 0, 0, 0)) == 0


def test_json_serialization(halmos: QuadraticForm) -> None:
    assert QuadraticForm.from_json(halmos.to_json()) == halmos
    with pytest.raises(InvalidFormError, match="JSON"):
        QuadraticForm.from_json("{")
    with pytest.raises(InvalidFormError, match="dimension"):
        QuadraticForm.from_dict({"dim": 3, "gram": [[1]]})


def test_exception_target_is_sorted_and_unique() -> None:
    target = ExceptionTarget.of(14, 5, 14)

    assert list(target) == [5, 14]
    assert 5 in target
    assert len(target) == 2
    assert str(target.with_value(1)) == "{1, 5, 14}"
    with pytest.raises(ValueError, match="positive integers"):
        ExceptionTarget.of(0)
