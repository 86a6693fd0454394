"""Exercises the Python bindings end to end.

Build and install first:
    pip install --no-build-isolation ./crates/python
"""

import math

import vesselwatch as vw


def straight_track(mmsi, n, knots=12.0, period=60):
    step = knots * 1852.0 / 3600.0 * period
    dlon = step / (111_320.0 * math.cos(math.radians(37.0)))
    return [(mmsi, 24.0 + i * dlon, 37.0, 1_451_606_400 + i * period) for i in range(n)]


def main():
    d = vw.haversine((24.0, 37.0), (24.0, 38.0))
    assert abs(d - 111_195.0) < 1.0, d

    assert vw.holds_for([1, 5], [3, 9]) == [(1, 3), (5, 9)]
    assert vw.holds_for([4], []) == [(4, None)]
    assert vw.point_in_polygon((0.5, 0.5), [(0, 0), (1, 0), (1, 1), (0, 1)])

    cfg = vw.Config()
    assert cfg.window == (21600, 3600)
    cfg.turn_threshold_deg = 20.0
    assert "turn_threshold_deg = 20.0" in cfg.to_toml()

    tracker = vw.Tracker(1)
    for _, lon, lat, tau in straight_track(1, 20):
        verdict, _ = tracker.observe(lon, lat, tau)
        assert verdict == "accept", verdict
    # 270 m back west five seconds later is about 105 knots
    verdict, _ = tracker.observe(lon - 0.003, lat, tau + 5)
    assert verdict == "ImplausibleSpeed", verdict

    quiet = vw.replay(straight_track(7, 120), collect_raw=True)
    assert quiet.ces == []
    assert quiet.metrics["compression_ratio"] == 1.0

    fleet = vw.generate(n_vessels=30, duration_s=12 * 3600, seed=3, plants=1)
    ledger_kinds = {e["kind"] for e in fleet.ledger}
    result = fleet.run(collect_raw=True)
    names = {c["name"] for c in result.ces}
    assert {"possibleRendezvous", "possiblePicking", "fastApproach"} <= names, names
    assert {"rendezvous", "picking", "fastApproach"} <= ledger_kinds, ledger_kinds

    sharded_cfg = vw.Config()
    sharded_cfg.shard_count = 4
    sharded_cfg.partitioning = "sub_grid"
    sharded = fleet.run(sharded_cfg)
    assert [repr(c) for c in sharded.critical_points] == [repr(c) for c in result.critical_points]
    assert sharded.ces == result.ces

    rmse = vw.fleet_rmse(result.raw, result.critical_points)
    assert abs(rmse - result.metrics["rmse_m"]) < 1e-6, (rmse, result.metrics["rmse_m"])

    print(f"{len(fleet)} reports from {fleet.vessel_count} vessels")
    print(result.metrics_table())
    print("smoke test passed")


if __name__ == "__main__":
    main()
