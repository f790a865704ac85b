import numpy as np
import pytest

from dhlattice import (
    BlockVector,
    Boundary,
    ConfigurationError,
    DimensionMismatchError,
    PeriodicCoefficients,
    Window,
    apply_A,
    apply_S,
    assemble,
    coercivity_bounds,
    floquet_symbol,
    l2_inner,
    lp_norm,
)
from helpers import (
    model_coefficients,
    n2_coefficients,
    period2_coefficients,
    random_block_vector,
    random_coefficients,
    random_window,
)

TOL = 1e-12


def dense_from_apply(window, block_dim, op):
    """Matrix oracle: apply the operator to every canonical basis vector."""
    dim = window.num_nodes * 2 * block_dim
    mat = np.empty((dim, dim))
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = 1.0
        mat[:, j] = op(BlockVector.from_flat(window, block_dim, e)).flat
    return mat


class TestApplyA:
    def test_zero(self):
        x = BlockVector.zeros(Window.zero_pad(2), 1)
        assert lp_norm(apply_A(x), 2) == 0.0

    def test_hand_example(self):
        w = Window.zero_pad(1)
        x = BlockVector(w, 1, [[0, 0], [1, 0], [0, 0]])
        z = apply_A(x)
        np.testing.assert_allclose(z.entries, [[0, -1], [0, 1], [0, 0]], atol=TOL)
        assert l2_inner(z, z) == pytest.approx(2.0, abs=TOL)
        assert l2_inner(z, z) <= 4.0 * l2_inner(x, x)

    @pytest.mark.parametrize("boundary", [Boundary.ZERO_PAD, Boundary.PERIODIC])
    def test_self_adjoint_random(self, boundary):
        rng = np.random.default_rng(10)
        for _ in range(100):
            half = int(rng.integers(1, 12))
            w = Window(half, boundary)
            n = int(rng.integers(1, 4))
            x = random_block_vector(w, n, rng)
            y = random_block_vector(w, n, rng)
            assert l2_inner(apply_A(x), y) == pytest.approx(
                l2_inner(x, apply_A(y)), abs=TOL
            )

    def test_dense_oracle_symmetric(self):
        rng = np.random.default_rng(11)
        w = Window.zero_pad(4)
        mat = dense_from_apply(w, 2, apply_A)
        np.testing.assert_allclose(mat, mat.T, atol=TOL)
        x = random_block_vector(w, 2, rng)
        np.testing.assert_allclose(mat @ x.flat, apply_A(x).flat, atol=TOL)

    def test_norm_bound(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            w = random_window(1, rng, max_half_width=32)
            x = random_block_vector(w, int(rng.integers(1, 4)), rng)
            assert lp_norm(apply_A(x), 2) <= 2.0 * lp_norm(x, 2) + TOL


class TestApplyS:
    def test_zero(self):
        x = BlockVector.zeros(Window.zero_pad(2), 1)
        coeffs = model_coefficients()
        assert lp_norm(apply_S(x, coeffs), 2) == 0.0

    def test_sign_convention(self):
        coeffs = model_coefficients()
        w = Window.zero_pad(0)
        for t in (1.0, -2.5, 0.25):
            x = BlockVector(w, 1, [[t, 0.0]])
            np.testing.assert_allclose(apply_S(x, coeffs).entries, [[0.0, t]], atol=TOL)

    def test_norm_bound_lambda(self):
        rng = np.random.default_rng(13)
        coeffs = period2_coefficients()
        for _ in range(100):
            w = random_window(coeffs.period, rng, max_half_width=24)
            x = random_block_vector(w, 1, rng)
            assert lp_norm(apply_S(x, coeffs), 2) <= coeffs.Lambda0 * lp_norm(x, 2) + TOL

    def test_dimension_mismatch(self):
        coeffs = model_coefficients()
        x = BlockVector.zeros(Window.zero_pad(1), 2)
        with pytest.raises(DimensionMismatchError):
            apply_S(x, coeffs)

    def test_periodic_divisibility_enforced(self):
        coeffs = period2_coefficients()
        x = BlockVector.zeros(Window(2, Boundary.PERIODIC), 1)  # 5 nodes, period 2
        with pytest.raises(ConfigurationError):
            apply_S(x, coeffs)

    def test_phase_convention(self):
        coeffs = period2_coefficients()
        w = Window.zero_pad(2)
        x = BlockVector(w, 1, np.ones((5, 2)))
        z = apply_S(x, coeffs)
        # node n uses S(n mod T): nodes -2, 0, 2 -> S(0); -1, 1 -> S(1)
        for i, n in enumerate(w.nodes):
            expected = -coeffs.matrices[n % 2] @ x.entries[i]
            np.testing.assert_allclose(z.entries[i], expected, atol=TOL)


class TestAssemble:
    def test_single_node_hand_assembly(self):
        # zero-padded single node: A contributes [[0,1],[1,0]], -S(0) another
        op = assemble(Window.zero_pad(0), model_coefficients())
        np.testing.assert_allclose(op.to_dense(), [[0.0, 2.0], [2.0, 0.0]], atol=TOL)

    @pytest.mark.parametrize("boundary", [Boundary.ZERO_PAD, Boundary.PERIODIC])
    def test_matrix_symmetric(self, boundary):
        coeffs = period2_coefficients()
        w = Window.periodic_cells(2, 6) if boundary is Boundary.PERIODIC else Window.zero_pad(6)
        mat = assemble(w, coeffs).to_dense()
        np.testing.assert_allclose(mat, mat.T, atol=TOL)

    def test_oracle_equivalence(self):
        rng = np.random.default_rng(14)
        for coeffs in (model_coefficients(), period2_coefficients(), n2_coefficients()):
            for _ in range(34):
                w = random_window(coeffs.period, rng, max_half_width=16)
                op = assemble(w, coeffs)
                x = random_block_vector(w, coeffs.block_dim, rng)
                expected = apply_A(x).entries + apply_S(x, coeffs).entries
                np.testing.assert_allclose(
                    op.apply(x).entries, expected, atol=TOL
                )

    def test_operator_norm_bound(self):
        for coeffs in (model_coefficients(), period2_coefficients(), n2_coefficients()):
            w = Window.zero_pad(20)
            op = assemble(w, coeffs)
            norm = np.abs(np.linalg.eigvalsh(op.to_dense())).max()
            assert norm <= 2.0 + coeffs.Lambda0 + 1e-10

    def test_combined_norm_bound_random(self):
        rng = np.random.default_rng(15)
        coeffs = n2_coefficients()
        w = Window.zero_pad(16)
        op = assemble(w, coeffs)
        for _ in range(100):
            x = random_block_vector(w, coeffs.block_dim, rng)
            assert lp_norm(op.apply(x), 2) <= (2.0 + coeffs.Lambda0) * lp_norm(x, 2) + TOL

    def test_periodic_divisibility(self):
        with pytest.raises(ConfigurationError):
            assemble(Window(3, Boundary.PERIODIC), period2_coefficients())  # 7 nodes


class TestBandedStorage:
    def test_banded_matches_dense(self):
        rng = np.random.default_rng(16)
        coeffs = n2_coefficients()
        w = Window.zero_pad(9)
        dense_op = assemble(w, coeffs, storage="dense")
        banded_op = assemble(w, coeffs, storage="banded")
        np.testing.assert_allclose(banded_op.to_dense(), dense_op.matrix, atol=TOL)
        for _ in range(10):
            v = rng.standard_normal(dense_op.dim)
            np.testing.assert_allclose(banded_op.matvec(v), dense_op.matvec(v), atol=1e-10)
        wd, _ = dense_op.eigh()
        wb, vb = banded_op.eigh()
        np.testing.assert_allclose(wb, wd, atol=1e-9)
        np.testing.assert_allclose(
            np.linalg.norm(banded_op.to_dense() @ vb - vb * wb, axis=0),
            np.zeros(dense_op.dim),
            atol=1e-9,
        )

    def test_auto_threshold(self):
        coeffs = model_coefficients()
        assert assemble(Window.zero_pad(10), coeffs).storage == "dense"
        big = Window.zero_pad(260)  # 521 nodes > 512
        assert assemble(big, coeffs).storage == "banded"

    def test_periodic_banded_rejected(self):
        with pytest.raises(ConfigurationError):
            assemble(Window.periodic(8), model_coefficients(), storage="banded")


class TestFloquetSymbol:
    def test_model_analytic_endpoints(self):
        coeffs = model_coefficients()
        sym0 = floquet_symbol(0.0, coeffs)
        np.testing.assert_allclose(sym0, [[0, 1], [1, 0]], atol=TOL)
        np.testing.assert_allclose(np.linalg.eigvalsh(sym0), [-1.0, 1.0], atol=TOL)
        sym_pi = floquet_symbol(np.pi, coeffs)
        np.testing.assert_allclose(sym_pi, [[0, 3], [3, 0]], atol=TOL)
        np.testing.assert_allclose(np.linalg.eigvalsh(sym_pi), [-3.0, 3.0], atol=TOL)

    def test_model_analytic_formula(self):
        coeffs = model_coefficients()
        for theta in np.linspace(0.0, 2.0 * np.pi, 17, endpoint=False):
            sym = floquet_symbol(theta, coeffs)
            expected = np.array(
                [[0.0, 2.0 - np.exp(-1j * theta)], [2.0 - np.exp(1j * theta), 0.0]]
            )
            np.testing.assert_allclose(sym, expected, atol=TOL)

    @pytest.mark.parametrize(
        "coeffs_fn", [model_coefficients, period2_coefficients, n2_coefficients]
    )
    def test_hermitian(self, coeffs_fn):
        coeffs = coeffs_fn()
        for theta in (0.0, 0.7, np.pi, 4.0):
            sym = floquet_symbol(theta, coeffs)
            np.testing.assert_allclose(sym, sym.conj().T, atol=TOL)

    def test_conjugation_symmetry(self):
        coeffs = period2_coefficients()
        m = 16
        for j in range(m):
            a = np.linalg.eigvalsh(floquet_symbol(2 * np.pi * j / m, coeffs))
            b = np.linalg.eigvalsh(floquet_symbol(2 * np.pi * (m - j) / m, coeffs))
            np.testing.assert_allclose(a, b, atol=TOL)

    @pytest.mark.parametrize(
        "coeffs_fn,cells",
        [
            (model_coefficients, 8),
            (model_coefficients, 9),
            (period2_coefficients, 8),
            (n2_coefficients, 8),
        ],
    )
    def test_floquet_consistency_with_direct_eigensolve(self, coeffs_fn, cells):
        coeffs = coeffs_fn()
        window = Window.periodic_cells(coeffs.period, cells)
        direct = np.sort(np.linalg.eigvalsh(assemble(window, coeffs).to_dense()))
        union = np.sort(
            np.concatenate(
                [
                    np.linalg.eigvalsh(floquet_symbol(2 * np.pi * j / cells, coeffs))
                    for j in range(cells)
                ]
            )
        )
        np.testing.assert_allclose(direct, union, atol=1e-9)


class TestCoercivityBounds:
    def test_model(self):
        assert coercivity_bounds(model_coefficients()) == pytest.approx((1.0, 1.0), abs=TOL)

    def test_split(self):
        coeffs = PeriodicCoefficients([[[0.2, -1.0], [-1.0, 0.2]]])
        lo, hi = coercivity_bounds(coeffs)
        assert lo == pytest.approx(0.8, abs=TOL)
        assert hi == pytest.approx(1.2, abs=TOL)

    def test_random_families_positive(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            coeffs = random_coefficients(int(rng.integers(1, 4)), int(rng.integers(1, 4)), rng)
            lo, hi = coercivity_bounds(coeffs)
            assert 0.0 < lo <= hi
