import hashlib
import json
import time

import numpy as np
import pytest

from errors import ComputationError, InputOutputError, UsageError
from job_config import job_to_pairs, load_job_file, write_job_file
from main import main, parse_and_validate, parse_sweep, run_sweep, sweep_points
from models import Command, JobSpec, OutputFormat, Reflections, Spacing

HEADER = "power,normalized,pol_E,pol_M,channel_prop,channel_evan,l_max_used,est_error"

LARGE_D_RADII = ["large-d", "--material-sphere", "sio2-like", "--material-plate", "sio2-like",
                 "--sweep-radius", "1e-8:1e-7:5:log", "--t-plate", "300", "--tol", "1e-3"]


# --------------------------------------------------------------------------- #
# Parsing and validation                                                       #
# --------------------------------------------------------------------------- #

def test_valid_cylinder_job():
    job = parse_and_validate(["radiate-cylinder", "--material", "sio2-like", "--radius", "1e-6",
                              "--temperature", "300"])
    assert job.command == Command.RADIATE_CYLINDER
    assert job.radius == 1e-6 and job.temperature == 300.0
    assert job.sweep_variables() == []
    assert job.format == OutputFormat.CSV


def test_missing_parameter_is_named():
    with pytest.raises(UsageError, match="radius"):
        parse_and_validate(["radiate-sphere", "--material", "sio2-like", "--temperature", "300"])


def test_extraneous_parameter_is_named():
    with pytest.raises(UsageError, match="--gap"):
        parse_and_validate(["radiate-plate", "--material", "sio2-like", "--temperature", "300", "--gap", "1e-7"])


def test_fixed_value_and_sweep_are_exclusive():
    with pytest.raises(UsageError, match="mutually exclusive"):
        parse_and_validate(["transfer-plates", "--material-1", "sio2-like", "--material-2", "gold-drude",
                            "--gap", "1e-7", "--sweep-d", "1e-8:1e-6:3:log", "--t1", "300", "--t2", "0"])


def test_log_sweep_has_requested_points():
    sweep = parse_sweep("1e-8:1e-5:20:log", "sweep_d")
    values = sweep.values()
    assert len(values) == 20
    np.testing.assert_allclose(values[0], 1e-8)
    np.testing.assert_allclose(values[-1], 1e-5)
    np.testing.assert_allclose(np.diff(np.log(values)), np.log(10) * 3 / 19)
    assert sweep.spacing == Spacing.LOG
    assert parse_sweep("1:2:3").spacing == Spacing.LIN


@pytest.mark.parametrize("text", ["1:2", "0:1:3", "1:2:0", "1:2:3:cubic", "a:b:c"])
def test_bad_sweeps(text):
    with pytest.raises(UsageError):
        parse_sweep(text, "sweep_radius")


def test_sweep_temperature_replaces_the_emitter_temperature():
    job = parse_and_validate(["transfer-sphere-plate", "--material-sphere", "sio2-like", "--material-plate",
                              "sio2-like", "--radius", "5e-6", "--gap", "1e-7", "--t-sphere", "0",
                              "--sweep-temperature", "100:300:3:lin"])
    assert job.t_plate is None
    assert [p["T"] for p in sweep_points(job)] == [100.0, 200.0, 300.0]


def test_grid_order_is_d_then_radius():
    job = parse_and_validate(["pta", "--material-sphere", "sio2-like", "--material-plate", "sio2-like",
                              "--sweep-radius", "1e-6:2e-6:2:lin", "--sweep-d", "1e-8:1e-7:2:log",
                              "--t-plate", "300", "--t-sphere", "0"])
    assert job.sweep_variables() == ["d", "R"]
    points = sweep_points(job)
    assert [(p["d"], p["R"]) for p in points] == [(1e-8, 1e-6), (1e-8, 2e-6), (1e-7, 1e-6), (1e-7, 2e-6)]


SPHERE = ["radiate-sphere", "--material", "sio2-like", "--radius", "1e-6", "--temperature", "300"]
SPHERE_PLATE = ["transfer-sphere-plate", "--material-sphere", "sio2-like", "--material-plate", "sio2-like",
                "--radius", "1e-6", "--gap", "1e-7", "--t-plate", "300", "--t-sphere", "0"]


@pytest.mark.parametrize("argv", [
    SPHERE[:4] + ["-1"] + SPHERE[5:],
    SPHERE[:6] + ["hot"],
    SPHERE + ["--tol", "0"],
    SPHERE + ["--jobs", "0"],
    SPHERE + ["--mu", "1,2,3"],
    SPHERE_PLATE + ["--l-max", "x"],
    SPHERE_PLATE + ["--l-max", "0"],
    SPHERE_PLATE + ["--solver", "cholesky"],
])
def test_invalid_values(argv):
    with pytest.raises(UsageError):
        parse_and_validate(argv)


def test_options_of_sphere_plate():
    job = parse_and_validate(["transfer-sphere-plate", "--material-sphere", "gold-drude", "--material-plate",
                              "constant:4,1", "--radius", "1e-6", "--gap", "1e-7", "--t-plate", "300",
                              "--t-sphere", "0", "--reflections", "one", "--l-max", "12", "--solver", "neumann",
                              "--divergent-only", "--mu", "1.5,0.1"])
    assert job.reflections == Reflections.ONE
    assert job.l_max == 12
    assert job.divergent_only
    assert job.mu == 1.5 + 0.1j
    auto = parse_and_validate(["transfer-sphere-plate", "--material-sphere", "gold-drude", "--material-plate",
                               "gold-drude", "--radius", "1e-6", "--gap", "1e-7", "--t-plate", "300",
                               "--t-sphere", "0", "--l-max", "auto"])
    assert auto.l_max is None


def test_missing_material_file_is_an_io_error(tmp_path):
    with pytest.raises(InputOutputError):
        parse_and_validate(["radiate-plate", "--material", str(tmp_path / "none.csv"), "--temperature", "300"])


def test_bad_constant_material_is_a_usage_error():
    with pytest.raises(UsageError, match="--material"):
        parse_and_validate(["radiate-plate", "--material", "constant:x", "--temperature", "300"])


# --------------------------------------------------------------------------- #
# Job files                                                                    #
# --------------------------------------------------------------------------- #

def test_flags_override_job_file(tmp_path):
    path = tmp_path / "job.env"
    path.write_text(
        "# plate emission\n"
        "command=radiate-plate\n"
        "material=sio2-like\n"
        "temperature=300\n"
        "tol=1e-4\n",
        encoding="utf-8",
    )
    job = parse_and_validate(["--config", str(path), "--temperature", "500"])
    assert job.command == Command.RADIATE_PLATE
    assert job.temperature == 500.0
    assert job.tol == 1e-4


def test_job_file_keys_accept_underscores(tmp_path):
    path = tmp_path / "job.env"
    path.write_text("T_PLATE=300\nmaterial_sphere=sio2-like\n", encoding="utf-8")
    assert load_job_file(str(path)) == {"t-plate": "300", "material-sphere": "sio2-like"}


def test_unknown_job_file_key(tmp_path):
    path = tmp_path / "job.env"
    path.write_text("command=radiate-plate\ncolour=blue\n", encoding="utf-8")
    with pytest.raises(UsageError, match="colour"):
        parse_and_validate([], config=str(path))


def test_missing_job_file(tmp_path):
    with pytest.raises(InputOutputError):
        parse_and_validate(["--config", str(tmp_path / "nope.env")])


def test_written_job_file_reproduces_the_job(tmp_path):
    job = parse_and_validate(LARGE_D_RADII + ["--mu", "1.2,0.05", "--format", "json"])
    pairs = job_to_pairs(job)
    assert pairs["command"] == "large-d"
    assert pairs["sweep-radius"] == "1e-08:1e-07:5:log"
    path = tmp_path / "job.env"
    with path.open("w", encoding="utf-8") as stream:
        write_job_file(job, stream)
    assert parse_and_validate(["--config", str(path)]) == job


# --------------------------------------------------------------------------- #
# Sweep executor                                                               #
# --------------------------------------------------------------------------- #

@pytest.mark.asyncio
async def test_rows_are_emitted_in_grid_order():
    points = [{"d": float(i)} for i in range(6)]

    def evaluate(point):
        # later points finish first
        time.sleep(0.02 * (6 - point["d"]))
        return {"power": point["d"] * 2}

    emitted = []
    count = await run_sweep(points, evaluate, lambda p, row: emitted.append((p["d"], row["power"])), jobs=4)
    assert count == 6
    assert emitted == [(float(i), 2.0 * i) for i in range(6)]


@pytest.mark.asyncio
async def test_failure_flushes_earlier_rows_and_names_the_point():
    points = [{"R": float(i)} for i in range(5)]

    def evaluate(point):
        if point["R"] == 2.0:
            raise ArithmeticError("diverged")
        return {"power": 1.0}

    emitted = []
    with pytest.raises(ComputationError) as info:
        await run_sweep(points, evaluate, lambda p, row: emitted.append(p["R"]), jobs=2)
    assert emitted == [0.0, 1.0]
    assert info.value.point == {"R": 2.0}
    assert isinstance(info.value.cause, ArithmeticError)


# --------------------------------------------------------------------------- #
# End to end                                                                   #
# --------------------------------------------------------------------------- #

def test_radius_sweep_writes_one_row_per_radius(tmp_path):
    out = tmp_path / "out.csv"
    assert main(LARGE_D_RADII + ["--output", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "R," + HEADER
    assert len(lines) == 6
    powers = [float(line.split(",")[1]) for line in lines[1:]]
    # dipole absorption grows as R^3
    np.testing.assert_allclose(powers[-1] / powers[0], 1e3, rtol=1e-2)
    assert all(line.split(",")[7] == "" for line in lines[1:])


def test_output_is_reproducible_across_job_counts(tmp_path):
    serial, parallel = tmp_path / "serial.csv", tmp_path / "parallel.csv"
    assert main(LARGE_D_RADII + ["--output", str(serial), "--jobs", "1"]) == 0
    assert main(LARGE_D_RADII + ["--output", str(parallel), "--jobs", "3"]) == 0
    assert serial.read_bytes() == parallel.read_bytes()


@pytest.mark.slow
def test_near_field_sweep_is_byte_identical_across_runs(tmp_path):
    argv = ["transfer-sphere-plate", "--material-sphere", "sio2-like", "--material-plate", "sio2-like",
            "--radius", "5e-6", "--sweep-d", "1e-8:1e-7:3:log", "--t-plate", "300", "--t-sphere", "0",
            "--reflections", "one", "--divergent-only", "--tol", "1e-3", "--jobs", "2"]
    first, second = tmp_path / "first.csv", tmp_path / "second.csv"
    assert main(argv + ["--output", str(first)]) == 0
    assert main(argv + ["--output", str(second)]) == 0
    assert hashlib.sha256(first.read_bytes()).hexdigest() == hashlib.sha256(second.read_bytes()).hexdigest()
    assert len(first.read_text(encoding="utf-8").splitlines()) == 4


def test_equal_temperatures_give_zero_rows(capsys):
    code = main(["transfer-sphere-plate", "--material-sphere", "sio2-like", "--material-plate", "sio2-like",
                 "--radius", "5e-6", "--sweep-d", "1e-7:1e-6:3:log", "--t-plate", "300", "--t-sphere", "300"])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "d," + HEADER
    assert len(lines) == 4
    assert all(line.split(",")[1] == "0.0" for line in lines[1:])


def test_json_output_echoes_the_job(tmp_path):
    out = tmp_path / "out.json"
    argv = LARGE_D_RADII + ["--format", "json", "--output", str(out)]
    assert main(argv) == 0
    document = json.loads(out.read_text(encoding="utf-8"))
    assert document["version"]
    assert len(document["rows"]) == 5
    assert set(document["rows"][0]) == {"R"} | set(HEADER.split(","))
    assert JobSpec.model_validate(document["job"]) == parse_and_validate(argv)


def test_failing_grid_point_exits_with_four(tmp_path):
    material = tmp_path / "narrow.csv"
    material.write_text("omega_rad_s,eps_re,eps_im\n1e8,4.0,1.0\n1e15,3.0,0.5\n", encoding="utf-8")
    out = tmp_path / "out.csv"
    code = main(["large-d", "--material-sphere", str(material), "--material-plate", str(material),
                 "--radius", "1e-7", "--sweep-temperature", "10:1000:3:log", "--tol", "1e-3",
                 "--output", str(out)])
    assert code == 4
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "T," + HEADER
    np.testing.assert_allclose([float(line.split(",")[0]) for line in lines[1:]], [10.0, 100.0])


def test_exit_codes_for_bad_input(tmp_path):
    assert main(["radiate-sphere", "--material", "sio2-like", "--temperature", "300"]) == 2
    assert main(["radiate-plate", "--material", str(tmp_path / "x.csv"), "--temperature", "300"]) == 3
    assert main(["no-such-command"]) == 2
