"""Test the DPS and Bose-symmetric DPS membership models."""

from collections import Counter

import numpy as np
import pytest

from dpskit.enums import Formalism, Hierarchy, Regime, SolveStatus, Verdict
from dpskit.exceptions import (
    DimensionMismatchError,
    InconsistentModelError,
    NotBoseSymmetricError,
    NumericalFailure,
    ParameterError,
    SupportMismatchError,
)
from dpskit.hermitian import HermitianMatrix
from dpskit.relax import (
    build_dps_bose,
    build_dps_moment,
    build_dps_tensor,
    build_model,
    certificate_from_atoms,
    certificate_tensor,
    check_membership,
    dump_model,
    moments_from_tensor,
    reconstruct,
    to_lmi,
    verify_certificate,
)
from dpskit.sdp import solve_feasibility
from dpskit.states import dicke, family_rho_aap, family_rho_ab, project

MAX_ENTANGLED = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2)


def _isotropic(p: float) -> HermitianMatrix:
    """p |Phi+><Phi+| + (1 - p) I/4, separable iff p <= 1/3."""
    phi = np.outer(MAX_ENTANGLED, MAX_ENTANGLED)
    return HermitianMatrix(p * phi + (1 - p) * np.eye(4) / 4, (2, 2))


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _separable_atoms(rng: np.random.Generator, n: int, count: int) -> list:
    atoms = []
    for _ in range(count):
        x = _unit(rng.standard_normal(n) + 1j * rng.standard_normal(n))
        y = _unit(rng.standard_normal(n) + 1j * rng.standard_normal(n))
        atoms.append((rng.uniform(0.5, 1.5), x, y))
    return atoms


def _state_of(atoms: list) -> HermitianMatrix:
    n = len(atoms[0][1])
    rho = sum(
        w * np.kron(np.outer(x, x.conj()), np.outer(y, y.conj()))
        for w, x, y in atoms
    )
    return HermitianMatrix(rho, (n, n))


@pytest.mark.unit
def test_max_entangled_margin() -> None:
    """The maximally entangled state's partial transpose has eigenvalue -1/2."""
    rho = HermitianMatrix(np.outer(MAX_ENTANGLED, MAX_ENTANGLED), (2, 2))
    report = check_membership(rho, 1)
    assert report.verdict is Verdict.INFEASIBLE
    assert report.margin == pytest.approx(0.5, abs=1e-5)


@pytest.mark.unit
def test_margin_is_scale_invariant() -> None:
    """The state is trace-normalized before the solve."""
    rho = _isotropic(0.5)
    first = check_membership(rho, 1)
    second = check_membership(rho.scaled(7.0), 1)
    assert first.margin == pytest.approx(second.margin, abs=1e-7)


@pytest.mark.integration
@pytest.mark.parametrize("formalism", [Formalism.MOMENT, Formalism.TENSOR])
@pytest.mark.parametrize(
    ("p", "verdict"), [(0.2, Verdict.FEASIBLE), (0.5, Verdict.INFEASIBLE)]
)
def test_isotropic_states(formalism, p, verdict) -> None:
    """Both formalisms find the separability threshold p = 1/3 at t = 2."""
    report = check_membership(_isotropic(p), 2, formalism=formalism)
    assert report.verdict is verdict


RHO_AAP_CASES = [
    (3.0, 0.5, 1, Verdict.FEASIBLE),
    (3.0, 0.5, 2, Verdict.INFEASIBLE),
    (1.5, 0.5, 1, Verdict.INFEASIBLE),
    (2.0, 0.4, 1, Verdict.INFEASIBLE),
    (2.0, 2.0, 1, Verdict.FEASIBLE),
    (2.0, 2.0, 2, Verdict.FEASIBLE),
    (1.5, 1.5, 1, Verdict.FEASIBLE),
    (1.5, 1.5, 2, Verdict.FEASIBLE),
]

RHO_AB_CASES = [
    (0.5, 0.25, Verdict.FEASIBLE),
    (0.6, 0.4, Verdict.FEASIBLE),
    (0.3, 0.5, Verdict.INFEASIBLE),
    (0.2, 0.8, Verdict.INFEASIBLE),
    (0.6, -0.6, Verdict.INFEASIBLE),
]


@pytest.mark.integration
@pytest.mark.parametrize(("a", "a_prime", "t", "verdict"), RHO_AAP_CASES)
def test_rho_aap_grid(a, a_prime, t, verdict) -> None:
    """Level one needs a a' >= 1, level two needs a, a' >= 1."""
    rho = family_rho_aap(a, a_prime)
    report = check_membership(rho, t, regime=Regime.CLDUI)
    assert report.verdict is verdict
    assert abs(report.margin) > 1e-6


@pytest.mark.integration
@pytest.mark.parametrize(("a", "a_prime"), [(3.0, 0.5), (2.0, 2.0)])
def test_rho_aap_levels_are_monotone(a, a_prime) -> None:
    """Rejected at t stays rejected at t + 1; accepted at t + 1 was at t."""
    rho = family_rho_aap(a, a_prime)
    first, second = (
        check_membership(rho, t, regime=Regime.CLDUI).verdict for t in (1, 2)
    )
    if first is Verdict.INFEASIBLE:
        assert second is Verdict.INFEASIBLE
    if second is Verdict.FEASIBLE:
        assert first is Verdict.FEASIBLE


@pytest.mark.integration
@pytest.mark.parametrize(("a", "a_prime"), [(3.0, 0.5), (2.0, 0.4), (2.0, 2.0)])
def test_real_certificates_suffice(a, a_prime) -> None:
    """Pinning imaginary parts to zero keeps the verdict of a real state."""
    rho = family_rho_aap(a, a_prime)
    for t in (1, 2):
        real = check_membership(rho, t, regime=Regime.CLDUI, real=True)
        full = check_membership(rho, t, regime=Regime.CLDUI, real=False)
        assert real.verdict is full.verdict


@pytest.mark.unit
def test_face_reduction_clears_the_kernel() -> None:
    """rho_{3, 1/2} has a kernel; unreduced it sits on the boundary."""
    rho = family_rho_aap(3.0, 0.5)
    plain = check_membership(
        rho, 1, regime=Regime.CLDUI, face_reduction=False
    )
    assert plain.verdict is Verdict.MARGINAL
    reduced = build_model(rho, 1, regime=Regime.CLDUI, face_reduction=True)
    reduced_total = sum(b.reduced_size for b in reduced.blocks)
    assert reduced_total < sum(reduced.block_sizes)


@pytest.mark.integration
@pytest.mark.parametrize(("a", "b", "verdict"), RHO_AB_CASES)
def test_rho_ab_ldoi(a, b, verdict) -> None:
    """rho(a, b) passes level one iff -1/2 <= b and |b| <= a <= 1."""
    report = check_membership(family_rho_ab(a, b), 1, regime=Regime.LDOI)
    assert report.verdict is verdict
    assert abs(report.margin) > 1e-6


@pytest.mark.integration
def test_rho_ab_levels_are_monotone() -> None:
    """A state rejected at level one is rejected at level two."""
    rho = family_rho_ab(0.3, 0.5)
    for t in (1, 2):
        report = check_membership(rho, t, regime=Regime.LDOI)
        assert report.verdict is Verdict.INFEASIBLE


@pytest.mark.integration
@pytest.mark.parametrize("formalism", [Formalism.MOMENT, Formalism.TENSOR])
def test_rho_ab_bose(formalism) -> None:
    """A separable rho(a, b) lies in the Bose hierarchy at t = 2."""
    report = check_membership(
        family_rho_ab(0.6, 0.4),
        2,
        hierarchy=Hierarchy.BOSE,
        formalism=formalism,
    )
    assert report.verdict is Verdict.FEASIBLE


@pytest.mark.integration
@pytest.mark.parametrize("hierarchy", [Hierarchy.DPS, Hierarchy.BOSE])
def test_dicke_is_rejected(hierarchy) -> None:
    """D_12 D_12* is entangled and NPT."""
    report = check_membership(
        dicke(3, 0, 1), 1, regime=Regime.LDUI, hierarchy=hierarchy
    )
    assert report.verdict is Verdict.INFEASIBLE


@pytest.mark.unit
def test_input_validation() -> None:
    """Wrong level, pattern, symmetry or regime are refused."""
    rho = _isotropic(0.5)
    with pytest.raises(ParameterError):
        build_dps_moment(rho, 0)
    with pytest.raises(SupportMismatchError):
        build_dps_moment(rho, 1, Regime.LDUI)
    with pytest.raises(NotBoseSymmetricError):
        build_dps_bose(family_rho_aap(3.0, 0.5), 1)
    with pytest.raises(ParameterError):
        build_model(
            family_rho_ab(0.6, 0.4),
            1,
            regime=Regime.LDOI,
            hierarchy=Hierarchy.BOSE,
        )


@pytest.mark.unit
def test_inconsistent_model_is_infeasible(mocker) -> None:
    """Contradictory equalities are reported without a solve."""
    mocker.patch(
        "dpskit.relax.build_model",
        side_effect=InconsistentModelError("clash"),
    )
    report = check_membership(_isotropic(0.2), 2)
    assert report.status is SolveStatus.INCONSISTENT
    assert report.verdict is Verdict.INFEASIBLE
    assert report.margin == float("inf")


@pytest.mark.unit
def test_stalled_membership_is_an_error(monkeypatch) -> None:
    """A solve stopped by tiny steps raises instead of guessing a verdict."""
    monkeypatch.setattr("dpskit.sdp.STALL_STEP", 10.0)
    rho = HermitianMatrix(np.outer(MAX_ENTANGLED, MAX_ENTANGLED), (2, 2))
    with pytest.raises(NumericalFailure) as exc:
        check_membership(rho, 2, face_reduction=False)
    assert exc.value.report is not None
    assert exc.value.report.verdict is None


@pytest.mark.unit
def test_tensor_and_moment_blocks_agree() -> None:
    """Collapsed tensor cliques have the moment block sizes."""
    rho = _isotropic(0.2)
    moment = build_dps_moment(rho, 2, face_reduction=False)
    tensor = build_dps_tensor(rho, 2, face_reduction=False)
    assert Counter(tensor.block_sizes) == Counter(moment.block_sizes)
    assert Counter(moment.block_sizes) == Counter({6: 2, 8: 1})
    assert tensor.raw_sizes == Counter({8: 3})
    assert len(tensor.variables) == len(moment.variables)


@pytest.mark.unit
def test_level_one_has_no_free_unknowns() -> None:
    """At t = 1 the certificate is the state itself."""
    lmi = to_lmi(build_model(_isotropic(0.5), 1))
    assert lmi.num_vars == 0
    assert lmi.block_sizes == [4, 4]


@pytest.mark.integration
def test_separable_atoms_give_a_certificate(rng) -> None:
    """The moments of a separable decomposition pass every check."""
    atoms = _separable_atoms(rng, 2, 12)
    rho = _state_of(atoms)
    model = build_dps_moment(rho, 2)
    moments = certificate_from_atoms(model, atoms)
    report = verify_certificate(rho, model, moments)
    assert report.passed, report.violations


@pytest.mark.integration
def test_bose_atoms_give_a_certificate(rng) -> None:
    """sum w (xx*)^(t+1) certifies sum w xx* (x) xx* in the Bose model."""
    atoms = [
        (w, x, x)
        for w, x, _ in _separable_atoms(rng, 2, 10)
    ]
    rho = _state_of(atoms)
    model = build_dps_bose(rho, 2)
    certificate = certificate_from_atoms(model, atoms)
    report = verify_certificate(rho, model, certificate)
    assert report.passed, report.violations


@pytest.mark.integration
def test_solver_certificate_verifies(rng) -> None:
    """The certificate found by the solver passes the independent checks."""
    rho = _state_of(_separable_atoms(rng, 2, 12))
    model = build_dps_moment(rho, 2)
    report = solve_feasibility(to_lmi(model))
    assert report.verdict is Verdict.FEASIBLE
    check = verify_certificate(rho, model, reconstruct(model, report.solution))
    assert check.passed, check.violations
    assert all(check.psd)


@pytest.mark.unit
def test_verify_flags_an_npt_certificate() -> None:
    """An NPT state is no certificate for itself."""
    rho = HermitianMatrix(np.outer(MAX_ENTANGLED, MAX_ENTANGLED), (2, 2))
    model = build_dps_moment(rho, 1, face_reduction=False)
    moments = reconstruct(model, np.zeros(model.solution.num_free))
    report = verify_certificate(rho, model, moments)
    assert report.psd == [True, False]
    assert report.trace_ok
    assert not report.passed


@pytest.mark.unit
def test_certificate_tensor_checks_length() -> None:
    """The moment vector must match the model."""
    model = build_dps_moment(_isotropic(0.5), 1)
    with pytest.raises(DimensionMismatchError):
        certificate_tensor(model, np.zeros(len(model.variables) + 1))


@pytest.mark.unit
def test_dump_model() -> None:
    """The dump lists variables, blocks and equalities."""
    model = build_dps_moment(family_rho_aap(3.0, 0.5), 1, Regime.CLDUI)
    dumped = dump_model(model)
    assert dumped["regime"] == "cldui"
    assert len(dumped["variables"]) == len(model.variables)
    assert [b["size"] for b in dumped["blocks"]] == model.block_sizes
    assert dumped["free_unknowns"] == 0
    assert all(
        isinstance(name, str)
        for eq in dumped["equations"]
        for name in eq["coefficients"]
    )


@pytest.mark.unit
def test_moments_read_back_from_the_tensor(rng) -> None:
    """The tensor certificate holds the moments it was built from."""
    atoms = _separable_atoms(rng, 2, 6)
    model = build_dps_moment(_state_of(atoms), 2, face_reduction=False)
    moments = certificate_from_atoms(model, atoms)
    tensor = certificate_tensor(model, moments)
    assert np.allclose(moments_from_tensor(model, tensor), moments)
    with pytest.raises(DimensionMismatchError):
        moments_from_tensor(model, np.eye(4))


def _mixed_state(rng: np.random.Generator, n: int, p: float) -> HermitianMatrix:
    """p psi psi* + (1 - p) I / n^2 for a random unit psi."""
    psi = _unit(rng.standard_normal(n * n) + 1j * rng.standard_normal(n * n))
    rho = p * np.outer(psi, psi.conj()) + (1 - p) * np.eye(n * n) / n**2
    return HermitianMatrix(rho, (n, n))


def _random_states(rng: np.random.Generator, count: int) -> list:
    """Full-rank n = 3 states; even ones sit inside the separable ball."""
    return [
        _mixed_state(rng, 3, 0.1 if k % 2 == 0 else rng.uniform(0.3, 0.9))
        for k in range(count)
    ]


@pytest.mark.slow
@pytest.mark.parametrize("regime", [Regime.GENERIC, Regime.CLDUI])
def test_moment_and_tensor_models_agree(rng, regime) -> None:
    """Both formalisms give one verdict and one margin at t = 2."""
    for rho in _random_states(rng, 20):
        state = project(rho, regime)
        moment = check_membership(state, 2, regime=regime)
        tensor = check_membership(
            state, 2, regime=regime, formalism=Formalism.TENSOR
        )
        assert moment.verdict is tensor.verdict
        assert moment.margin == pytest.approx(tensor.margin, abs=1e-6)


@pytest.mark.slow
def test_projection_keeps_generic_certificates(rng) -> None:
    """Generic-feasible states project to CLDUI-feasible states."""
    accepted = 0
    for rho in _random_states(rng, 20):
        generic = check_membership(rho, 2)
        if generic.verdict is not Verdict.FEASIBLE:
            continue
        accepted += 1
        projected = project(rho, Regime.CLDUI)
        report = check_membership(projected, 2, regime=Regime.CLDUI)
        assert report.verdict is not Verdict.INFEASIBLE
        assert check_membership(projected, 2).verdict is Verdict.FEASIBLE
    assert accepted >= 10
