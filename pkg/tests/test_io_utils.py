"""Tests for CSV/JSON round-trips of simulation artifacts."""

import json

import numpy as np
import pytest

from sqmlab.analysis import disturbance_map, tomo_validate
from sqmlab.distributions import propagate_mc
from sqmlab.engine import MeasChannel, filter_record, simulate_trajectory
from sqmlab.io_utils import (
    read_distribution,
    read_record,
    read_trajectory,
    read_transfer_maps,
    write_disturbance_field,
    write_distribution,
    write_json,
    write_record,
    write_tomo_comparison,
    write_trajectory,
    write_transfer_maps,
    write_variance_series,
)
from sqmlab.retrodiction import TransferMap, composite_map
from sqmlab.states import from_bloch

GAMMA = 2.0 * np.pi * 122e3
DT = 16e-9


def standard_channels():
    return (
        MeasChannel(delta=0.0, gamma=GAMMA, eta=0.41),
        MeasChannel(delta=np.pi / 2, gamma=GAMMA, eta=0.49),
    )


def test_record_roundtrip_is_exact(tmp_path):
    _, record = simulate_trajectory(
        from_bloch([0.6, 0.0, 0.0]), standard_channels(), 1e-6, DT, seed=5
    )
    path = tmp_path / "record.csv"
    write_record(path, record)
    back = read_record(path)
    assert np.array_equal(back.samples, record.samples)
    assert back.dt == record.dt
    assert back.seed == record.seed
    for a, b in zip(back.channels, record.channels):
        assert a.delta == pytest.approx(b.delta, abs=1e-15)
        assert a.gamma == pytest.approx(b.gamma, rel=1e-15)
        assert a.eta == b.eta
    # the paper geometry at 1 us / 16 ns yields 63 rows per channel
    lines = path.read_text().splitlines()
    assert lines[0] == "t,V1,V2"
    assert len(lines) == 1 + 63


def test_record_sidecar_units_and_optional_fields(tmp_path):
    channels = (
        MeasChannel(delta=np.pi / 4, gamma=GAMMA, eta=0.5, ringup_kappa=4.5e7),
        MeasChannel(delta=0.0, gamma=GAMMA, eta=0.0, dephasing_only=True),
    )
    record_samples = np.zeros((4, 1))
    from sqmlab.engine import MeasurementRecord

    record = MeasurementRecord(dt=DT, samples=record_samples, channels=channels, seed=9)
    path = tmp_path / "rec.csv"
    write_record(path, record)
    sidecar = json.loads((tmp_path / "rec.csv.json").read_text())
    assert sidecar["dt"] == DT
    assert sidecar["seed"] == 9
    first, second = sidecar["channels"]
    assert first["delta_deg"] == pytest.approx(45.0)
    assert first["gamma_hz_2pi"] == pytest.approx(122e3)
    assert first["ringup_kappa_hz_2pi"] == pytest.approx(4.5e7 / (2 * np.pi))
    assert "dephasing_only" not in first
    assert second["dephasing_only"] is True
    back = read_record(path)
    assert back.channels[1].dephasing_only
    assert back.channels[0].ringup_kappa == pytest.approx(4.5e7)


def test_record_reader_rejects_malformed_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,W1\n0,1\n")
    write_json(tmp_path / "bad.csv.json", {"dt": DT, "channels": [], "seed": None})
    with pytest.raises(ValueError):
        read_record(path)


def test_trajectory_roundtrip_and_filter_replay(tmp_path):
    channels = standard_channels()
    traj, record = simulate_trajectory(
        from_bloch([0.0, 0.0, 0.0]), channels, 1e-6, DT, seed=12
    )
    tpath = tmp_path / "traj.csv"
    write_trajectory(tpath, traj)
    back = read_trajectory(tpath)
    assert np.array_equal(back.bloch, traj.bloch)
    assert np.array_equal(back.times, traj.times)
    # the stored record replays to the stored trajectory exactly
    rpath = tmp_path / "rec.csv"
    write_record(rpath, record)
    replayed = filter_record(from_bloch([0.0, 0.0, 0.0]), read_record(rpath))
    assert np.abs(replayed.bloch - back.bloch).max() < 1e-12


def test_trajectory_reader_rejects_irregular_times(tmp_path):
    path = tmp_path / "traj.csv"
    path.write_text("t,x,y,z\n0,0,0,0\n1e-8,0.1,0,0\n3e-8,0.2,0,0\n")
    with pytest.raises(ValueError):
        read_trajectory(path)


def test_distribution_roundtrip_2d_and_3d(tmp_path):
    blob = propagate_mc(
        np.zeros(3), standard_channels(), [0.32e-6], 2000, 7, dt=DT, n_bins=21
    )[0]
    path = tmp_path / "dist2.csv"
    write_distribution(path, blob)
    header = path.read_text().splitlines()[0]
    assert header == "x,y,p"
    back = read_distribution(path, time=blob.time)
    assert np.array_equal(back.probs, blob.probs)
    assert all(np.allclose(a, b) for a, b in zip(back.edges, blob.edges))

    ball = propagate_mc(
        np.zeros(3), standard_channels(), [0.32e-6], 2000, 7, dt=DT,
        n_bins=13, ndim=3,
    )[0]
    path3 = tmp_path / "dist3.csv"
    write_distribution(path3, ball)
    assert path3.read_text().splitlines()[0] == "x,y,z,p"
    back3 = read_distribution(path3)
    assert np.array_equal(back3.probs, ball.probs)


def test_distribution_reader_rejects_partial_grid(tmp_path):
    path = tmp_path / "dist.csv"
    path.write_text("x,y,p\n-0.5,-0.5,0.25\n-0.5,0.5,0.25\n0.5,-0.5,0.5\n")
    with pytest.raises(ValueError):
        read_distribution(path)


def test_variance_series_format(tmp_path):
    from sqmlab.distributions import AngularVarianceSeries

    series = AngularVarianceSeries(
        times=np.array([0.0, 1e-7, 2e-7]),
        variances=np.array([0.01, 0.02, 0.031]),
        slope=1.05e5,
        intercept=0.0099,
        bimodal=np.zeros(3, dtype=bool),
        diffusive=True,
    )
    path = tmp_path / "var.csv"
    write_variance_series(path, series)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,variance"
    assert lines[2].split(",")[1] == "0.02"


def test_disturbance_field_csv(tmp_path):
    field = disturbance_map(standard_channels(), 64e-9, n_polar=7, n_azimuth=8,
                            n_disk_radial=4, check_interior=False)
    path = tmp_path / "dist_field.csv"
    write_disturbance_field(path, field)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,z,d"
    assert len(lines) == 1 + field.points.shape[0]
    values = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    assert values[:, 3].min() >= 0.0


def test_tomo_comparison_table(tmp_path):
    rng = np.random.default_rng(3)
    finals = rng.normal(0.0, 0.4, size=(4000, 3)).clip(-0.57, 0.57)
    comp = tomo_validate(finals, finals, seed=8, n_voxels=5)
    path = tmp_path / "tomo.csv"
    write_tomo_comparison(path, comp)
    lines = path.read_text().splitlines()
    assert lines[0] == (
        "voxel_ix,voxel_iy,voxel_iz,component,predicted,measured,err,count"
    )
    assert len(lines) == 1 + len(comp)
    first = lines[1].split(",")
    assert first[3] in ("x", "y")
    assert int(first[7]) > 0


def test_transfer_map_roundtrip(tmp_path):
    _, record = simulate_trajectory(
        from_bloch([0.3, -0.2, 0.0]), standard_channels(), 0.2e-6, DT, seed=2
    )
    composed = composite_map(record)
    step_like = TransferMap(np.eye(4) * 0.5, log_offset=-3.25)
    path = tmp_path / "maps.csv"
    write_transfer_maps(path, [composed, step_like])
    back = read_transfer_maps(path)
    assert len(back) == 2
    assert np.array_equal(back[0].matrix, composed.matrix)
    assert back[0].log_offset == composed.log_offset
    assert back[1].log_offset == -3.25


def test_written_files_are_byte_deterministic(tmp_path):
    _, record = simulate_trajectory(
        from_bloch([0.6, 0.0, 0.0]), standard_channels(), 0.5e-6, DT, seed=4
    )
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    write_record(a, record)
    write_record(b, record)
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.csv.json").read_bytes() == (tmp_path / "b.csv.json").read_bytes()
