import csv
import io
import json
import subprocess
import sys
from dataclasses import replace
from pathlib import Path

import pytest

from physarum_surface.arena import NutrientSource
from physarum_surface.cli import main, read_points
from physarum_surface.errors import InputError, ParseError, ScenarioError, ValidationError
from physarum_surface.scenario import BUILTINS, Schedule, builtin, run
from physarum_surface.scenario.config import load_scenario, loads_scenario
from physarum_surface.scenario.ops import parse_ops, run_ops
from physarum_surface.scenario.output import write_outputs
from physarum_surface.vec import Vec2

ROOT = Path(__file__).resolve().parents[1]
MINIMAL = """
[arena]
shape = "disc"
radius = 20.0

[[sources]]
id = "oat"
position = [10.0, 0.0]

[seed]
position = [-5.0, 0.0]
"""


def short(name="fig6_push", ticks=200, seed=0, **sched):
    s = builtin(name, seed)
    return s.replace(schedule=replace(s.schedule, ticks=ticks, **sched))


def read_csv(path):
    lines = Path(path).read_text().splitlines()
    return lines[0], list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


class TestConfig:
    def test_minimal_defaults(self, tmp_path):
        p = tmp_path / "tiny.toml"
        p.write_text(MINIMAL)
        s = load_scenario(p)
        assert s.name == "tiny"
        assert s.arena.cell_size == 0.5
        assert s.schedule == Schedule()
        assert s.preferences.weights == {"oat": 1.0}
        assert s.seed.mass == 200.0 and s.rng_seed == 0

    def test_shipped_examples_load(self):
        for p in sorted((ROOT / "scenarios").glob("*.toml")):
            load_scenario(p)

    def test_source_outside_names_it(self):
        text = MINIMAL.replace("[10.0, 0.0]", "[30.0, 0.0]")
        with pytest.raises(ValidationError) as ei:
            loads_scenario(text)
        assert ei.value.field == "sources.oat.position"

    def test_misspelt_key(self):
        with pytest.raises(ValidationError, match="frictionn"):
            loads_scenario(MINIMAL + "\n[mechanics]\nfrictionn = 2.0\n")

    def test_unknown_arena_key_reported_first(self):
        text = MINIMAL.replace('radius = 20.0', 'radius = 20.0\nradios = 3').replace("[seed]\nposition = [-5.0, 0.0]", "")
        with pytest.raises(ValidationError, match="radios"):
            loads_scenario(text)

    def test_parse_error_location(self):
        with pytest.raises(ParseError) as ei:
            loads_scenario("[arena]\nshape = \"disc\"\nradius = = 3\n")
        assert ei.value.line == 3 and ei.value.column is not None

    def test_wrong_type(self):
        with pytest.raises(ValidationError, match="seed.mass"):
            loads_scenario(MINIMAL.replace("[-5.0, 0.0]", "[-5.0, 0.0]\nmass = \"lots\""))

    def test_seed_needs_one_location(self):
        with pytest.raises(ValidationError, match="seed"):
            loads_scenario(MINIMAL.replace("position = [-5.0, 0.0]", 'position = [-5.0, 0.0]\nbody = "x"'))

    def test_unstable_field(self):
        with pytest.raises(ValidationError, match="field"):
            loads_scenario(MINIMAL + "\n[field]\ndiffusion = 50.0\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_scenario(tmp_path / "none.toml")

    def test_not_utf8(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_bytes(b"\xff\xfe[arena]")
        with pytest.raises(ParseError):
            load_scenario(p)


class TestBuiltins:
    def test_dish(self):
        s = builtin("fig3_tree3")
        assert s.arena.shape == "disc" and s.arena.radius == 45.0
        assert len(s.sources) == 3 and all(src.host_body for src in s.sources)

    def test_tank(self):
        s = builtin("tank_explore")
        assert s.arena.extent == (200.0, 150.0)

    def test_pull_layout(self):
        s = builtin("fig7_pull")
        assert sum(b.anchored for b in s.bodies) == 2
        assert [b.id for b in s.bodies if not b.anchored] == ["foam"]

    def test_unknown_lists_names(self):
        with pytest.raises(ScenarioError) as ei:
            builtin("fig9")
        for name in BUILTINS:
            assert name in str(ei.value)

    @pytest.mark.parametrize("name", sorted(BUILTINS))
    def test_all_valid_and_hash_seeded(self, name):
        assert builtin(name, 1).digest() != builtin(name, 2).digest()
        assert builtin(name, 1).digest() == builtin(name, 1).digest()

    def test_host_source_follows_body(self):
        s = builtin("fig3_tree3")
        pos = {b.id: b.position for b in s.bodies}
        assert all(src.position == pos[src.host_body] for src in s.sources)


class TestRun:
    def test_zero_ticks(self):
        rec = run(short(ticks=0, snapshot_every=50))
        assert [snap.tick for snap in rec.snapshots] == [0]
        assert rec.final is None and rec.metrics == []

    def test_snapshot_schedule(self):
        assert [x.tick for x in run(short(ticks=120, snapshot_every=50)).snapshots] == [0, 50, 100, 120]
        assert [x.tick for x in run(short(ticks=120, snapshot_every=0)).snapshots] == [0, 120]

    def test_deterministic(self):
        a, b = run(short(ticks=300)), run(short(ticks=300))
        assert a.metrics == b.metrics and a.events == b.events and a.bodies == b.bodies
        assert [x.pgm for x in a.snapshots] == [x.pgm for x in b.snapshots]

    def test_seed_changes_run(self):
        a, b = run(short(ticks=300, seed=1)), run(short(ticks=300, seed=2))
        assert a.scenario_hash != b.scenario_hash
        assert a.bodies != b.bodies or a.metrics != b.metrics

    def test_anchored_bodies_never_move(self):
        rec = run(short("fig3_tree3", ticks=600), snapshots=False)
        rows = [r for r in rec.bodies if r[4]]
        assert rows
        start = {r[1]: (r[2], r[3]) for r in rows if r[0] == rows[0][0]}
        assert all((r[2], r[3]) == start[r[1]] for r in rows)


class TestOutputs:
    def test_files_and_headers(self, tmp_path):
        rec = run(short(ticks=120, snapshot_every=60))
        write_outputs(rec, tmp_path)
        h = rec.scenario_hash
        for name in ("metrics.csv", "events.csv", "bodies.csv", "edges.csv"):
            first, rows = read_csv(tmp_path / name)
            assert first == f"# scenario {h}"
        summary = json.loads((tmp_path / "run.summary").read_text())
        assert summary["scenario_hash"] == h and summary["ticks"] == 120
        svg = (tmp_path / "snapshots" / "000060.svg").read_text()
        assert f"<!-- scenario {h} tick 60 -->" in svg.splitlines()[1]
        pgm = (tmp_path / "snapshots" / "000120.pgm").read_bytes()
        head = pgm.split(b"\n", 4)
        assert head[0] == b"P5" and head[1] == f"# scenario {h} tick 120".encode()
        nx, ny = map(int, head[2].split())
        assert head[3] == b"255" and len(head[4]) == nx * ny
        assert not list(tmp_path.rglob("*.tmp"))

    def test_rerun_replaces(self, tmp_path):
        write_outputs(run(short(ticks=120, snapshot_every=40)), tmp_path)
        assert len(list((tmp_path / "snapshots").iterdir())) == 8
        rec = run(short(ticks=60, snapshot_every=0, seed=3))
        write_outputs(rec, tmp_path)
        assert sorted(p.name for p in (tmp_path / "snapshots").iterdir()) == [
            "000000.pgm", "000000.svg", "000060.pgm", "000060.svg"]
        assert json.loads((tmp_path / "run.summary").read_text())["rng_seed"] == 3


class TestOps:
    def test_parse(self):
        ops = parse_ops("RUN 10 # go\n\nadd foam oat\nPUSH foam 1 0 5\nPULL foam seed\n")
        assert [(o.line, o.name) for o in ops] == [(1, "RUN"), (3, "ADD"), (4, "PUSH"), (5, "PULL")]
        assert ops[2].args == ("foam", 1.0, 0.0, 5.0)

    @pytest.mark.parametrize("text,line", [("RUN x", 1), ("\nJUMP 3", 2), ("LINK a", 1), ("PUSH f 1 0 z", 1)])
    def test_parse_errors(self, text, line):
        with pytest.raises(ParseError) as ei:
            parse_ops(text)
        assert ei.value.line == line

    def test_trace(self):
        script = "ADD foam\nPUSH foam 1 0 20\nRUN 100\nADD nowhere\nUNLINK n0 n1\n"
        res = run_ops(short(ticks=1000), script)
        rows = [(r[1], r[3]) for r in res.trace]
        assert rows[:2] == [(1, "accepted"), (1, "completed")]
        assert (2, "accepted") in rows and (2, "completed") in rows
        assert (4, "rejected") in rows and (5, "rejected") in rows
        push_done = next(r for r in res.trace if r[1] == 2 and r[3] == "completed")
        assert push_done[4] == "retracted"
        first = next(r for r in res.trace if r[1] == 2)
        x0 = float(first[5].split(":")[1].split(",")[0])
        x1 = float(push_done[5].split(":")[1].split(",")[0])
        assert x1 > x0


class TestCLI:
    def test_run(self, tmp_path, capsys):
        assert main(["run", "builtin:fig6_push", "--ticks", "50", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "run.summary").exists()
        assert "outputs in" in capsys.readouterr().out

    def test_run_file(self, tmp_path):
        assert main(["run", str(ROOT / "scenarios" / "minimal.toml"), "--ticks", "20", "--seed", "4",
                     "--out", str(tmp_path)]) == 0
        assert json.loads((tmp_path / "run.summary").read_text())["rng_seed"] == 4

    def test_validation_exit(self, tmp_path, capsys):
        p = tmp_path / "bad.toml"
        p.write_text(MINIMAL + "\n[mechanics]\nfrictionn = 1\n")
        assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 2
        assert "frictionn" in capsys.readouterr().err
        assert main(["run", "builtin:nope"]) == 2

    def test_runtime_exit(self, tmp_path):
        assert main(["run", str(tmp_path / "missing.toml")]) == 1
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert main(["run", "builtin:fig6_push", "--ticks", "1", "--out", str(blocker / "sub")]) == 1

    def test_mst(self, tmp_path, capsys):
        p = tmp_path / "pts.csv"
        p.write_text("x,y\n0,0\n3,0\n# note\n3,4\n")
        assert main(["mst", str(p)]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "i,j,length" and out[-1] == "total,,7"
        assert read_points(p) == [(0, 0), (3, 0), (3, 4)]

    def test_mst_bad_row(self, tmp_path):
        p = tmp_path / "pts.csv"
        p.write_text("0,0\n1,oops\n")
        assert main(["mst", str(p)]) == 2

    def test_batch(self, tmp_path):
        assert main(["batch", "builtin:fig5_straighten", "--seeds", "0..1", "--out", str(tmp_path)]) == 0
        first, rows = read_csv(tmp_path / "batch.csv")
        assert [r["rng_seed"] for r in rows] == ["0", "1"]
        assert (tmp_path / "seed_0001" / "run.summary").exists()

    def test_ops(self, tmp_path):
        out = tmp_path / "o"
        code = main(["ops", "builtin:fig6_push", str(ROOT / "scenarios" / "push_foam.ops"), "--out", str(out)])
        assert code == 0
        first, rows = read_csv(out / "trace.csv")
        assert first.startswith("# scenario ")
        assert [r["status"] for r in rows if r["line"] == "6"] == ["rejected"]

    def test_module_entry(self):
        r = subprocess.run([sys.executable, "-m", "physarum_surface", "run", "builtin:nosuch"],
                           capture_output=True, text=True)
        assert r.returncode == 2 and "valid names" in r.stderr


def test_outside_source_rejected_at_construction():
    s = builtin("fig6_push")
    with pytest.raises(ValidationError):
        s.replace(sources=(NutrientSource("x", Vec2(60, 0)),))
