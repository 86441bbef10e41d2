import numpy as np
import pytest

from gridsens.grid_model import (
    DegenerateDirectionError,
    DynamicsConfig,
    KronReductionError,
    build_grid_network,
    build_laplacian,
    discretize,
    find_branch,
    helmert_basis,
    kron_reduce,
    load_config,
    outage_direction,
    outage_vector,
    reduce_case,
    swing_state_matrix,
)
from gridsens.matpower import parse_matpower
from gridsens.matrix_core import DimensionError, StabilityError, ValidationError, eigenvalues
from gridsens.network import check_assumptions


def make_case(n_bus, gens, branches):
    bus = "\n".join(f"{i} 1;" for i in range(1, n_bus + 1))
    gen = "\n".join(f"{g};" for g in gens)
    br = "\n".join(f"{f} {t} 0 {x};" for f, t, x in branches)
    return parse_matpower(f"mpc.bus = [\n{bus}\n];\nmpc.gen = [\n{gen}\n];\nmpc.branch = [\n{br}\n];\n")


def assert_laplacian(L, tol=1e-12):
    scale = max(1.0, np.abs(L).max())
    assert np.allclose(L, L.T, atol=tol * scale)
    assert np.abs(L.sum(axis=1)).max() <= tol * scale
    assert np.linalg.eigvalsh(L).min() >= -1e-10 * scale


def test_two_bus_laplacian():
    L = build_laplacian(make_case(2, [1], [(1, 2, 0.1)]))
    assert np.allclose(L, [[10, -10], [-10, 10]], atol=1e-12)


def test_parallel_branches_sum():
    L = build_laplacian(make_case(2, [1], [(1, 2, 0.5), (2, 1, 0.25)]))
    assert np.allclose(L, [[6, -6], [-6, 6]])


def test_disconnected_block_diagonal():
    L = build_laplacian(make_case(4, [1, 3], [(1, 2, 1.0), (3, 4, 0.5)]))
    assert not np.any(L[:2, 2:]) and not np.any(L[2:, :2])
    assert_laplacian(L)


def test_nonpositive_reactance():
    with pytest.raises(ValidationError):
        build_laplacian(make_case(2, [1], [(1, 2, 0.0)]))
    with pytest.raises(ValidationError):
        build_laplacian(make_case(2, [1], [(1, 2, -0.1)]))


def test_case39_laplacian(case39):
    assert_laplacian(build_laplacian(case39))


def test_no_loads_reduction_is_identity():
    L = build_laplacian(make_case(3, [1, 2, 3], [(1, 2, 1.0), (2, 3, 0.5)]))
    assert np.array_equal(kron_reduce(L, [0, 1, 2], []), L)


def test_path_series_law():
    L = build_laplacian(make_case(3, [1, 3], [(1, 2, 1.0), (2, 3, 1.0)]))
    assert np.allclose(kron_reduce(L, [0, 2], [1]), [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)


def test_case39_reduction(case39):
    m = reduce_case(case39)
    assert m.L_red.shape == (10, 10)
    assert_laplacian(m.L_red, tol=1e-10)


def test_isolated_island():
    case = make_case(4, [1], [(1, 2, 1.0), (3, 4, 1.0)])
    with pytest.raises(KronReductionError) as exc:
        kron_reduce(build_laplacian(case), [0], [1, 2, 3])
    assert "[2, 3]" in str(exc.value)


def test_two_stage_reduction(case39):
    L = build_laplacian(case39)
    m = reduce_case(case39)
    gens, loads = list(m.gen_idx), list(m.load_idx)
    first, second = loads[::2], loads[1::2]
    keep = sorted(gens + second)
    stage1 = kron_reduce(L, keep, first)
    pos = {b: i for i, b in enumerate(keep)}
    stage2 = kron_reduce(stage1, [pos[g] for g in gens], [pos[l] for l in second])
    assert np.abs(stage2 - m.L_red).max() <= 1e-10 * np.abs(m.L_red).max()


def test_swing_blocks():
    g = 3
    A = swing_state_matrix(np.zeros((g, g)), np.eye(g), np.eye(g))
    assert np.array_equal(A, np.block([[np.zeros((g, g)), np.eye(g)], [np.zeros((g, g)), -np.eye(g)]]))
    assert np.array_equal(swing_state_matrix([[0.0]], 2.0, 4.0), [[0, 1], [0, -2]])
    with pytest.raises(DimensionError):
        swing_state_matrix(np.zeros((2, 2)), [1.0, 1.0, 1.0], 1.0)
    with pytest.raises(ValidationError):
        swing_state_matrix(np.zeros((2, 2)), [1.0, -1.0], 1.0)


def test_swing_eigenvalues_left_half_plane(case39):
    rng = np.random.default_rng(17)
    m = reduce_case(case39)
    A = swing_state_matrix(m.L_red, rng.uniform(0.5, 5, 10), rng.uniform(0.1, 3, 10))
    assert eigenvalues(A).eigenvalues.real.max() <= 1e-9


def test_discretize():
    assert np.array_equal(discretize(np.zeros((3, 3)), 0.1), np.eye(3))
    assert discretize([[-2.0]], 0.01)[0, 0] == pytest.approx(0.98)
    with pytest.raises(ValidationError):
        discretize(np.zeros((2, 2)), 0.0)


def test_reduced_model_shape(case39):
    m = reduce_case(case39)
    assert m.A_d.shape == (20, 20)
    assert np.array_equal(m.M, np.eye(10)) and np.array_equal(m.D, np.eye(10))
    assert m.gen_buses == tuple(range(30, 40))
    # Rigid rotation is an eigenvalue-1 mode of the full map.
    r = np.concatenate([np.ones(10), np.zeros(10)])
    assert np.allclose(m.A_d @ r, r)


def test_helmert_basis():
    for g in (2, 5, 10):
        H = helmert_basis(g)
        assert np.allclose(H.T @ H, np.eye(g - 1))
        assert np.allclose(H.sum(axis=0), 0)


def test_generator_only_direction():
    case = make_case(3, [1, 2, 3], [(1, 2, 0.5), (2, 3, 0.5)])
    m = reduce_case(case)
    v = outage_vector(m.L, m.gen_idx, m.load_idx, 0, 1)
    assert np.array_equal(v, [1.0, -1.0, 0.0])
    B, C = outage_direction(case, m, "1-2")
    assert np.allclose(C, [1, -1, 0, 0, 0, 0])
    assert np.allclose(B, [0, 0, 0, -0.01, 0.01, 0])


def _fd_check(L, gen_idx, load_idx, i, j):
    b = -L[i, j]
    h = 1e-6 * b
    u = np.zeros(L.shape[0])
    u[i], u[j] = 1.0, -1.0
    dL = np.outer(u, u)
    fd = (kron_reduce(L + h * dL, gen_idx, load_idx) - kron_reduce(L - h * dL, gen_idx, load_idx)) / (2 * h)
    v = outage_vector(L, gen_idx, load_idx, i, j)
    vv = np.outer(v, v)
    return np.linalg.norm(fd - vv), np.linalg.norm(vv)


def test_path_finite_difference():
    L = build_laplacian(make_case(3, [1, 3], [(1, 2, 1.0), (2, 3, 1.0)]))
    err, ref = _fd_check(L, [0, 2], [1], 0, 1)
    assert err <= 1e-6 * ref


def test_case39_finite_difference(case39):
    m = reduce_case(case39)
    rng = np.random.default_rng(18)
    pos = {b: i for i, b in enumerate(m.bus_ids)}
    for k in rng.choice(len(case39.branches), size=10, replace=False):
        br = case39.branches[k]
        err, ref = _fd_check(m.L, m.gen_idx, m.load_idx, pos[br.from_bus], pos[br.to_bus])
        assert err <= 1e-6 * ref


def test_unknown_and_malformed_lines(case39):
    m = reduce_case(case39)
    with pytest.raises(ValidationError):
        outage_direction(case39, m, "1-30")
    with pytest.raises(ValidationError):
        find_branch(case39, "37_25")
    assert find_branch(case39, "37-25") == find_branch(case39, "25-37")
    assert find_branch(case39, (25, 37)) == find_branch(case39, "37-25")


def test_invisible_line_degenerate():
    # Bus 3 hangs off load bus 2 and carries no generator.
    case = make_case(4, [1, 4], [(1, 2, 1.0), (2, 3, 1.0), (2, 4, 1.0)])
    m = reduce_case(case)
    with pytest.raises(DegenerateDirectionError):
        outage_direction(case, m, "2-3")


def test_green_network(case39, green):
    net, m = build_grid_network(case39, green)
    assert len(net.links) == 4
    assert net.link_ids == ("37-25", "36-23", "33-19", "39-9")
    assert net.dim == 18
    assert check_assumptions(net).observable["37-25"]


def test_red_network(case39, red):
    net, _ = build_grid_network(case39, red)
    assert net.link_ids == ("38-29", "34-20", "35-22", "39-1")
    assert net.dim == 18


def _impulse_energy(A, B, C, k):
    out, x = [], B.copy()
    for _ in range(k):
        out.append(C @ x)
        x = A @ x
    return np.array(out)


@pytest.mark.parametrize("config", [
    DynamicsConfig(contingencies=("37-25", "39-9")),
    DynamicsConfig(inertia={str(b): 1 + 0.1 * (b - 30) for b in range(30, 40)}, damping=2.0,
                   contingencies=("37-25", "39-9")),
])
def test_quotient_preserves_output_response(case39, config):
    net, m = build_grid_network(case39, config)
    uniform = isinstance(config.inertia, float)
    assert net.dim == (18 if uniform else 19)
    for line, link in zip(config.contingencies, net.links):
        B, C = outage_direction(case39, m, line)
        full = _impulse_energy(m.A_d, B, C, 300)
        red = _impulse_energy(net.A, link.B, link.C, 300)
        assert np.allclose(full, red, rtol=0, atol=1e-12 * np.abs(full).max())
        assert np.linalg.norm(link.C) == pytest.approx(np.linalg.norm(C), rel=1e-14)


def test_empty_contingencies(case39):
    with pytest.raises(ValidationError):
        build_grid_network(case39, DynamicsConfig())


def test_unstable_discretization(case39):
    with pytest.raises(StabilityError) as exc:
        build_grid_network(case39, DynamicsConfig(delta_t=10.0, contingencies=("37-25",)))
    assert "spectral radius" in str(exc.value) and "damping" in str(exc.value)


def test_config_loading(tmp_path, green):
    assert green.delta_t == 0.01 and green.contingencies == ("37-25", "36-23", "33-19", "39-9")
    p = tmp_path / "c.json"
    p.write_text('{"delta_t": 0.02, "inertia": {"30": 2.0}, "contingencies": []}')
    cfg = load_config(p)
    assert cfg.delta_t == 0.02
    case = make_case(2, [1, 2], [(1, 2, 0.5)])
    with pytest.raises(ValidationError):
        reduce_case(case, cfg)  # inertia missing for buses 1 and 2
    p.write_text('{"bogus": 1}')
    with pytest.raises(ValidationError):
        load_config(p)
    with pytest.raises(ValidationError):
        DynamicsConfig(delta_t=-1.0)


def test_per_bus_inertia(case39):
    cfg = DynamicsConfig(inertia={str(b): float(b - 29) for b in range(30, 40)})
    m = reduce_case(case39, cfg)
    assert np.array_equal(np.diag(m.M), np.arange(1.0, 11.0))
