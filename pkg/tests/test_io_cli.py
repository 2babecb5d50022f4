import csv
import json

import numpy as np
import pytest

from fairlp import cli, io
from fairlp.errors import EmptyData, InvalidInput, ParseError
from fairlp.fair_post import PostProblem, derive_pred_joint
from fairlp.fair_post import discrimination_of as post_disc
from fairlp.fair_post import distortion_of as post_dist
from fairlp.fair_pre import PreProblem, discrimination_of, distortion_of
from fairlp.instances import biased_instance, fair_joint, random_classifier, random_instance, saturated_classifier
from fairlp.prob_core import Channel, DistortionMatrix, JointDistribution

from oracles import highs_from_dump

Z1 = DistortionMatrix.zero_one(2)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def save_instance(tmp_path, joint: JointDistribution, w: Channel):
    jp = tmp_path / "joint.json"
    io.write_json(jp, io.joint_to_dict(joint))
    wp = tmp_path / "w.json"
    io.save_channel(wp, w)
    return str(jp), str(wp)


class TestDatasetFiles:
    def test_each_cell_once_is_uniform(self, tmp_path):
        rows = "".join(f"{a},{x},{y}\n" for a in range(2) for x in range(2) for y in range(2))
        counts = io.read_dataset_csv(write(tmp_path / "d.csv", "a,x,y\n" + rows))
        np.testing.assert_array_equal(io.load_joint_from_data(tmp_path / "d.csv").p, np.full((2, 2, 2), 1 / 8))
        assert counts.sum() == 8

    def test_counts_equal_expanded_rows(self, tmp_path, rng):
        counts = rng.integers(0, 5, size=(2, 3, 2))
        counts[0, 0, 0] += 1
        rows = ["a,x,y"]
        table = ["a,x,y,count"]
        for (a, x, y), c in np.ndenumerate(counts):
            rows += [f"{a},{x},{y}"] * int(c)
            table.append(f"{a},{x},{y},{c}")
        rng.shuffle(rows[1:])
        j1 = io.load_joint_from_data(write(tmp_path / "d.csv", "\n".join(rows) + "\n"))
        j2 = io.load_joint_from_data(counts=write(tmp_path / "c.csv", "\n".join(table) + "\n"))
        np.testing.assert_array_equal(j1.p, j2.p)

    def test_synthetic_matches_independent_count(self, tmp_path, rng):
        data = np.column_stack([rng.integers(0, 2, 1000), rng.integers(0, 4, 1000), rng.integers(0, 2, 1000)])
        path = tmp_path / "d.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["a", "x", "y"])
            writer.writerows(data.tolist())
        expected = {}
        with path.open() as fh:
            for rec in csv.DictReader(fh):
                key = (int(rec["a"]), int(rec["x"]), int(rec["y"]))
                expected[key] = expected.get(key, 0) + 1
        joint = io.load_joint_from_data(path)
        for key, c in expected.items():
            assert joint.p[key] == pytest.approx(c / 1000, abs=1e-15)

    @pytest.mark.parametrize("body, line", [
        ("a,x\n0,1\n", 1),
        ("a,x,y\n0,1,0\n0,x,1\n", 3),
        ("a,x,y\n0,1,0\n1,1\n", 3),
        ("a,x,y\n2,0,0\n", 2),
        ("a,x,y\n0,-1,0\n", 2),
    ])
    def test_malformed_rows(self, tmp_path, body, line):
        with pytest.raises(ParseError) as err:
            io.read_dataset_csv(write(tmp_path / "d.csv", body))
        assert err.value.line == line
        assert f":{line}:" in str(err.value)

    def test_bad_count(self, tmp_path):
        with pytest.raises(ParseError):
            io.read_counts_csv(write(tmp_path / "c.csv", "a,x,y,count\n0,0,0,-3\n"))

    def test_empty(self, tmp_path):
        with pytest.raises(EmptyData):
            io.read_dataset_csv(write(tmp_path / "d.csv", ""))
        with pytest.raises(EmptyData):
            io.read_dataset_csv(write(tmp_path / "d.csv", "a,x,y\n"))


class TestChannelFiles:
    def test_round_trip(self, tmp_path, rng):
        ch = Channel(rng.dirichlet(np.ones(3), size=2))
        io.save_channel(tmp_path / "c.json", ch)
        back = io.load_channel(tmp_path / "c.json")
        np.testing.assert_array_equal(back.k, ch.k)
        assert json.loads((tmp_path / "c.json").read_text()) == {"rows": 2, "cols": 3, "data": ch.k.ravel().tolist()}

    def test_group_pair(self, tmp_path):
        pair = (Channel.identity(2), Channel.uniform(2))
        io.save_channel(tmp_path / "c.json", pair)
        back = io.load_channel(tmp_path / "c.json")
        assert isinstance(back, tuple) and len(back) == 2
        np.testing.assert_array_equal(back[1].k, 0.5)

    @pytest.mark.parametrize("obj", [
        {"rows": 2, "cols": 2, "data": [1, 0, 0]},
        {"rows": 2, "data": [1, 0, 0, 1]},
        [{"rows": 1, "cols": 1, "data": [1]}],
        {"rows": 1, "cols": 2, "data": [0.7, 0.7]},
    ])
    def test_invalid(self, obj):
        with pytest.raises(InvalidInput):
            io.channel_from_dict(obj)

    def test_bad_json(self, tmp_path):
        with pytest.raises(ParseError):
            io.load_channel(write(tmp_path / "c.json", "{not json"))


class TestCli:
    def run(self, capsys, *argv):
        code = cli.main([str(a) for a in argv])
        return code, capsys.readouterr()

    def test_estimate(self, tmp_path, capsys):
        rows = "".join(f"{a},{x},{y}\n" for a in range(2) for x in range(2) for y in range(2))
        data = write(tmp_path / "d.csv", "a,x,y\n" + rows)
        code, out = self.run(capsys, "estimate", "--data", data, "--out", tmp_path / "o")
        assert code == 0
        assert "|X|=2" in out.out and "base-rate gap" in out.out
        joint = io.load_joint(tmp_path / "o" / "joint.json")
        np.testing.assert_array_equal(joint.p, 1 / 8)
        assert json.loads((tmp_path / "o" / "joint.json").read_text())["config"]["command"] == "estimate"

    def test_estimate_single_group(self, tmp_path, capsys):
        data = write(tmp_path / "d.csv", "a,x,y\n0,0,0\n0,1,1\n")
        code, out = self.run(capsys, "estimate", "--data", data, "--out", tmp_path / "o")
        assert code == 0
        assert "undefined" in out.out

    def test_estimate_parse_error(self, tmp_path, capsys):
        data = write(tmp_path / "d.csv", "a,x,y\n0,0,0\n0,zero,1\n")
        code, out = self.run(capsys, "estimate", "--data", data, "--out", tmp_path / "o")
        assert code == cli.EXIT_INVALID
        assert ":3:" in out.err

    def test_pre_curve_outputs(self, tmp_path, capsys, rng):
        joint, w = random_instance(rng)
        jp, wp = save_instance(tmp_path, joint, w)
        out = tmp_path / "o"
        code, _ = self.run(capsys, "pre-curve", "--joint", jp, "--classifier", wp, "--use-a", "--grid", 9,
                           "--oracle", "--step", 0.02, "--dump-lp", "--out", out)
        assert code == 0
        report = json.loads((out / "pre_report.json").read_text())
        for key in ("d_min", "d_max_bound", "d_max_exact", "breakpoints", "checks", "config", "oracle"):
            assert key in report
        assert report["side"] == "pre"
        assert report["d_max_exact"] <= report["d_max_bound"] + 1e-12
        assert report["oracle"]["available"] and report["oracle"]["max_gap"] <= 2e-2
        for pt in report["oracle"]["points"]:
            assert pt["oracle"] >= pt["lp"] - 1e-9
        curve = io.read_curve_csv(out / "pre_curve.csv")
        assert (curve[:, 2] == 0).sum() == 9
        assert (curve[:, 2] == 1).sum() == len(report["breakpoints"])
        assert (out / "pre_curve.csv").read_text().startswith("# config=")

        # every exported channel reproduces the reported numbers
        prob = PreProblem(joint, w, Z1, use_a=True)
        for pt in report["points"]:
            payload = json.loads((out / pt["channel_file"]).read_text())
            assert payload["side"] == "pre"
            ch = io.load_channel(out / pt["channel_file"])
            assert discrimination_of(prob, ch) == pytest.approx(pt["disc"], abs=1e-9)
            assert distortion_of(prob, ch) == pytest.approx(pt["distortion"], abs=1e-9)
            assert pt["disc"] == pytest.approx(pt["lp_value"], abs=1e-9)
        dumps = sorted((out / "pre_lp").glob("*.json"))
        assert len(dumps) == 9
        assert highs_from_dump(dumps[4].read_text()) == pytest.approx(report["points"][4]["lp_value"], abs=1e-8)

    def test_rerun_is_byte_identical(self, tmp_path, capsys, rng):
        joint, w = random_instance(rng, 3)
        jp, wp = save_instance(tmp_path, joint, w)
        args = ["--joint", jp, "--classifier", wp, "--grid", 7, "--out", tmp_path / "o"]
        self.run(capsys, "pre-curve", *args)
        first = {p: p.read_bytes() for p in (tmp_path / "o").rglob("*") if p.is_file()}
        self.run(capsys, "pre-curve", *args)
        second = {p: p.read_bytes() for p in (tmp_path / "o").rglob("*") if p.is_file()}
        assert first == second
        assert all(b"\r\n" not in blob for blob in first.values())

    def test_jobs_do_not_change_results(self, tmp_path, capsys, rng):
        joint, w = random_instance(rng, 3)
        jp, wp = save_instance(tmp_path, joint, w)
        for jobs in (1, 4):
            self.run(capsys, "post-curve", "--joint", jp, "--classifier", wp, "--jobs", jobs, "--out",
                     tmp_path / f"j{jobs}")
        a = io.read_curve_csv(tmp_path / "j1" / "post_curve.csv")
        b = io.read_curve_csv(tmp_path / "j4" / "post_curve.csv")
        np.testing.assert_array_equal(a, b)

    def test_fair_instance_flat_curve(self, tmp_path, capsys, rng):
        jp, wp = save_instance(tmp_path, fair_joint(rng), random_classifier(rng))
        code, _ = self.run(capsys, "pre-curve", "--joint", jp, "--classifier", wp, "--grid", 5, "--out", tmp_path)
        assert code == 0
        curve = io.read_curve_csv(tmp_path / "pre_curve.csv")
        assert np.all(curve[:, 1] <= 1e-9)
        assert np.all(curve[:, 2] == 0)

    def test_post_curve_side_field(self, tmp_path, capsys, rng):
        joint, w = random_instance(rng)
        jp, wp = save_instance(tmp_path, joint, w)
        code, _ = self.run(capsys, "post-curve", "--joint", jp, "--classifier", wp, "--grid", 5, "--oracle",
                           "--step", 0.02, "--out", tmp_path)
        assert code == 0
        report = json.loads((tmp_path / "post_report.json").read_text())
        assert report["side"] == "post"
        assert report["oracle"]["max_gap"] <= 2e-2
        prob = PostProblem(derive_pred_joint(w, joint), Z1)
        pt = report["points"][2]
        ch = io.load_channel(tmp_path / pt["channel_file"])
        assert post_disc(prob, ch) == pytest.approx(pt["disc"], abs=1e-9)
        assert post_dist(prob, ch) == pytest.approx(pt["distortion"], abs=1e-9)

    def test_infeasible_budget(self, tmp_path, capsys, rng):
        jp, wp = save_instance(tmp_path, *random_instance(rng))
        code, out = self.run(capsys, "pre-curve", "--joint", jp, "--classifier", wp, "--d-list", "0.0,0.9",
                             "--out", tmp_path)
        assert code == cli.EXIT_INFEASIBLE
        assert "d_min" in out.err

    def test_invalid_configs(self, tmp_path, capsys, rng):
        jp, wp = save_instance(tmp_path, *random_instance(rng))
        code, _ = self.run(capsys, "pre-curve", "--joint", tmp_path / "missing.json", "--classifier", wp)
        assert code == cli.EXIT_INVALID
        code, _ = self.run(capsys, "pre-curve", "--joint", jp, "--classifier", wp, "--oracle", "--step", 0.5)
        assert code == cli.EXIT_INVALID
        code, _ = self.run(capsys, "pre-curve", "--joint", jp, "--classifier", wp, "--distortion", "nope")
        assert code == cli.EXIT_INVALID
        with pytest.raises(SystemExit) as err:
            cli.main(["pre-curve", "--classifier", wp])
        assert err.value.code == 2
        with pytest.raises(SystemExit):
            cli.main(["pre-curve", "--joint", jp, "--classifier", wp, "--criterion", "xx"])

    def test_classifier_size_mismatch(self, tmp_path, capsys, rng):
        jp, _ = save_instance(tmp_path, *random_instance(rng))
        io.save_channel(tmp_path / "w3.json", Channel.identity(3))
        code, _ = self.run(capsys, "compare", "--joint", jp, "--classifier", tmp_path / "w3.json", "--out", tmp_path)
        assert code == cli.EXIT_INVALID

    def test_custom_distortion_file(self, tmp_path, capsys, rng):
        joint, w = random_instance(rng)
        jp, wp = save_instance(tmp_path, joint, w)
        io.write_json(tmp_path / "d.json", {"rows": 2, "cols": 2, "data": [0.0, 2.0, 1.0, 0.0]})
        code, _ = self.run(capsys, "post-curve", "--joint", jp, "--classifier", wp, "--distortion",
                           tmp_path / "d.json", "--grid", 3, "--out", tmp_path)
        assert code == 0
        report = json.loads((tmp_path / "post_report.json").read_text())
        assert report["d_max_bound"] == pytest.approx(
            PostProblem(derive_pred_joint(w, joint), DistortionMatrix(np.array([[0.0, 2.0], [1.0, 0.0]])))
            .pred_joint.p_y @ np.array([2.0, 1.0]) / 2)

    def test_compare_exit_codes(self, tmp_path, capsys):
        jp, wp = save_instance(tmp_path, *biased_instance(np.random.default_rng(37)))
        code, _ = self.run(capsys, "compare", "--joint", jp, "--classifier", wp, "--out", tmp_path)
        assert code == 0
        report = json.loads((tmp_path / "comparison.json").read_text())
        assert report["dominance_verdict"] == "PreDominates"
        assert report["config"]["command"] == "compare"
        jp, wp = save_instance(tmp_path, *biased_instance(np.random.default_rng(1)))
        code, _ = self.run(capsys, "compare", "--joint", jp, "--classifier", wp, "--out", tmp_path)
        assert code == cli.EXIT_CLAIM_FAILED

    def test_scatter(self, tmp_path, capsys):
        code, _ = self.run(capsys, "scatter", "--n", 50, "--seed", 3, "--out", tmp_path)
        assert code == 0
        text = (tmp_path / "scatter.csv").read_text()
        assert text.startswith("# seed=3 n=50\n")
        pts = io.read_scatter_csv(tmp_path / "scatter.csv")
        assert pts.shape == (50, 2)
        assert np.all((pts[:, 0] >= 0) & (pts[:, 0] <= 2)) and np.all(pts[:, 1] >= 0)

    def test_substitute(self, tmp_path, capsys, rng):
        joint = random_instance(rng, 4)[0]
        w = saturated_classifier(rng, 4)
        jp, wp = save_instance(tmp_path, joint, w)
        post = (Channel(rng.dirichlet(np.ones(2), size=2)), Channel(rng.dirichlet(np.ones(2), size=2)))
        io.save_channel(tmp_path / "post.json", post)
        code, _ = self.run(capsys, "substitute", "--joint", jp, "--classifier", wp, "--post-channel",
                           tmp_path / "post.json", "--out", tmp_path / "o")
        assert code == 0
        report = json.loads((tmp_path / "o" / "substitution_report.json").read_text())
        assert report["max_conditional_deviation"] <= 1e-9
        assert report["pre"]["disc"] == pytest.approx(report["post"]["disc"], abs=1e-9)
        pre = io.load_channel(tmp_path / "o" / "pre_channel.json")
        assert isinstance(pre, tuple)

    def test_substitute_unavailable(self, tmp_path, capsys, rng):
        jp, wp = save_instance(tmp_path, *random_instance(rng))
        code, out = self.run(capsys, "substitute", "--joint", jp, "--classifier", wp, "--post-channel", wp,
                             "--out", tmp_path)
        assert code == cli.EXIT_NO_SUBSTITUTION
        assert "error" in out.err
