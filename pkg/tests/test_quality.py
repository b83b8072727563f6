import numpy as np
import pytest
from scipy.optimize import linprog

from sandnet.surface import DeviationMap, Heatmap, deviation_map
from sandnet.quality import (
    TransportInstance,
    build_transport,
    crop_margin,
    downsample_map,
    emd_exact,
    score_product,
    solve_transport,
)


def lp_oracle(inst: TransportInstance) -> float:
    """Independent brute-force transportation LP (dense flow variables)."""
    n, m = len(inst.supply_mass), len(inst.demand_mass)
    c = inst.cost_matrix().ravel()
    a_eq = []
    b_eq = []
    for i in range(n):
        row = np.zeros(n * m)
        row[i * m : (i + 1) * m] = 1.0
        a_eq.append(row)
        b_eq.append(inst.supply_mass[i])
    for j in range(m):
        row = np.zeros(n * m)
        row[j::m] = 1.0
        a_eq.append(row)
        b_eq.append(inst.demand_mass[j])
    res = linprog(c, A_eq=np.asarray(a_eq), b_eq=np.asarray(b_eq), bounds=(0, None),
                  method="highs")
    assert res.success, res.message
    return float(res.fun)


def grid_instance(rng, side=5) -> TransportInstance:
    """Random balanced deviation pattern on a side x side grid."""
    cells = rng.normal(0.0, 1.0, size=(side, side))
    cells -= cells.mean()
    return build_transport(DeviationMap(cells=cells, cell_size=1.0))


# ------------------------------------------------------------ exact solver

def test_single_arc_unit_distance():
    inst = TransportInstance(
        supply_pos=np.array([[0.5, 0.5]]),
        supply_mass=np.array([1.0]),
        demand_pos=np.array([[1.5, 0.5]]),
        demand_mass=np.array([1.0]),
    )
    assert emd_exact(inst) == pytest.approx(1.0, abs=1e-12)


def test_split_demand_both_arcs_unit_distance():
    inst = TransportInstance(
        supply_pos=np.array([[0.0, 0.0]]),
        supply_mass=np.array([1.0]),
        demand_pos=np.array([[1.0, 0.0], [0.0, 1.0]]),
        demand_mass=np.array([0.5, 0.5]),
    )
    assert emd_exact(inst) == pytest.approx(1.0, abs=1e-12)


def test_matches_lp_oracle_on_random_grid_instances():
    rng = np.random.default_rng(2024)
    for _ in range(40):
        inst = grid_instance(rng, side=int(rng.integers(2, 6)))
        assert emd_exact(inst) == pytest.approx(lp_oracle(inst), abs=1e-9)


def test_identical_layout_costs_nothing():
    pos = np.array([[0.5, 0.5], [3.5, 1.5]])
    mass = np.array([1.0, 2.0])
    inst = TransportInstance(pos, mass, pos.copy(), mass.copy())
    assert emd_exact(inst) == pytest.approx(0.0, abs=1e-12)


def test_symmetric_under_supply_demand_swap():
    rng = np.random.default_rng(5)
    inst = grid_instance(rng)
    swapped = TransportInstance(
        supply_pos=inst.demand_pos,
        supply_mass=inst.demand_mass,
        demand_pos=inst.supply_pos,
        demand_mass=inst.supply_mass,
    )
    assert emd_exact(inst) == pytest.approx(emd_exact(swapped), rel=1e-12)


def test_scales_linearly_with_cell_size():
    rng = np.random.default_rng(6)
    cells = rng.normal(size=(4, 4))
    cells -= cells.mean()
    w1 = emd_exact(build_transport(DeviationMap(cells=cells, cell_size=1.0)))
    w3 = emd_exact(build_transport(DeviationMap(cells=cells, cell_size=3.0)))
    assert w3 == pytest.approx(3.0 * w1, rel=1e-12)


def test_optimal_flow_saturates_supplies_and_demands():
    rng = np.random.default_rng(7)
    inst = grid_instance(rng)
    _, flow = solve_transport(inst)
    assert np.max(np.abs(flow.sum(axis=1) - inst.supply_mass)) < 1e-9
    assert np.max(np.abs(flow.sum(axis=0) - inst.demand_mass)) < 1e-9


def test_unbalanced_instance_rejected():
    inst = TransportInstance(
        supply_pos=np.array([[0.0, 0.0]]),
        supply_mass=np.array([1.0]),
        demand_pos=np.array([[1.0, 0.0]]),
        demand_mass=np.array([2.0]),
    )
    with pytest.raises(ValueError, match="unbalanced"):
        emd_exact(inst)


def test_arc_guard():
    n = 1001
    inst = TransportInstance(
        supply_pos=np.zeros((n, 2)),
        supply_mass=np.ones(n),
        demand_pos=np.ones((n, 2)),
        demand_mass=np.ones(n),
    )
    with pytest.raises(ValueError, match="too large"):
        emd_exact(inst)


# --------------------------------------------------------- build_transport

def test_sign_split_adjacent_cells():
    dev = DeviationMap(cells=np.array([[1.0, -1.0]]), cell_size=1.0)
    inst = build_transport(dev)
    assert len(inst.supply_mass) == 1 and len(inst.demand_mass) == 1
    assert inst.supply_mass[0] == 1.0 and inst.demand_mass[0] == 1.0
    assert emd_exact(inst) == pytest.approx(1.0, abs=1e-12)


def test_all_zero_map_gives_empty_instance_and_zero_emd():
    inst = build_transport(DeviationMap(cells=np.zeros((5, 5))))
    assert inst.empty
    assert emd_exact(inst) == 0.0


def test_global_window_map_already_balanced():
    rng = np.random.default_rng(12)
    hm = Heatmap(cells=rng.uniform(0, 2, size=(9, 9)))
    dev = deviation_map(hm, 21)
    inst = build_transport(dev)
    s, d = inst.supply_mass.sum(), inst.demand_mass.sum()
    assert abs(s - d) <= 1e-9 * max(1.0, s)


def test_one_sided_map_rebalances_to_common_mean():
    cells = np.array([[3.0, -1.0]])
    inst = build_transport(DeviationMap(cells=cells))
    assert inst.supply_mass.sum() == pytest.approx(2.0)
    assert inst.demand_mass.sum() == pytest.approx(2.0)


# ----------------------------------------------------- score and plumbing

def test_downsample_preserves_signed_mass():
    rng = np.random.default_rng(13)
    dev = DeviationMap(cells=rng.normal(size=(10, 14)), cell_size=1.0)
    coarse = downsample_map(dev, 4)
    assert coarse.cells.shape == (3, 4)
    assert coarse.cell_size == 4.0
    assert coarse.cells.sum() == pytest.approx(dev.cells.sum(), abs=1e-12)


def test_downsample_identity():
    dev = DeviationMap(cells=np.ones((4, 4)))
    assert downsample_map(dev, 1) is dev


def test_crop_margin_geometry():
    hm = Heatmap(cells=np.arange(100.0).reshape(10, 10), cell_size=1.0)
    inner = crop_margin(hm, 2.0)
    assert inner.cells.shape == (6, 6)
    assert inner.origin == (2.0, 2.0)
    assert inner.cells[0, 0] == hm.cells[2, 2]
    with pytest.raises(ValueError, match="no interior"):
        crop_margin(hm, 5.0)


def test_score_zero_for_flat_map():
    pq = score_product(DeviationMap(cells=np.zeros((8, 8))), downsample=1)
    assert pq.emd == 0.0


def test_score_downsample_stability_on_smooth_map():
    # smooth deviation pattern: coarsening must not move the score much
    y, x = np.mgrid[0:32, 0:32]
    cells = np.sin(2 * np.pi * x / 32) * np.cos(2 * np.pi * y / 32)
    cells -= cells.mean()
    dev = DeviationMap(cells=cells, cell_size=1.0)
    total = np.abs(cells).sum() / 2
    s1 = score_product(dev, downsample=1, total_removed_mass=total).emd
    s2 = score_product(dev, downsample=2, total_removed_mass=total).emd
    assert abs(s1 - s2) / s1 < 0.15


def test_quality_results_row_format():
    from sandnet.netchan import NetworkConditions

    pq = score_product(
        DeviationMap(cells=np.zeros((4, 4))),
        downsample=1,
        tool_radius=12.5,
        conditions=NetworkConditions(40.0, 1.0, 0.05, 1000.0, seed=1),
    )
    assert pq.results_row() == "12.5,40.0,1.0,0.05,0.0"
