import numpy as np
import pytest

from sal360 import cli
from sal360.imageio import load_grid, save_pgm
from sal360.weights import save_weights

from conftest import smooth_erp, write_training_dir


def run(argv, capsys=None):
    code = cli.main(argv)
    return code


class TestProject:
    def test_round_trip_psnr(self, tmp_path):
        h = 128
        erp = smooth_erp(h, 2 * h)
        src = tmp_path / "erp.pgm"
        save_pgm(erp, src)
        faces = tmp_path / "faces"
        assert run(["project", "--in", str(src), "--out", str(faces),
                    "--direction", "erp2cmp", "--face-size", "64"]) == 0
        back = tmp_path / "back.pgm"
        assert run(["project", "--in", str(faces), "--out", str(back),
                    "--direction", "cmp2erp", "--height", str(h)]) == 0
        rec = load_grid(back)
        mse = ((rec - erp) ** 2).mean()
        psnr = 10 * np.log10(1.0 / mse)
        assert psnr >= 30.0

    def test_bad_aspect_exit2(self, tmp_path):
        save_pgm(np.zeros((64, 100)), tmp_path / "bad.pgm")
        assert run(["project", "--in", str(tmp_path / "bad.pgm"),
                    "--out", str(tmp_path / "o"),
                    "--direction", "erp2cmp"]) == 2

    def test_missing_faces_exit2(self, tmp_path):
        (tmp_path / "faces").mkdir()
        assert run(["project", "--in", str(tmp_path / "faces"),
                    "--out", str(tmp_path / "o.pgm"),
                    "--direction", "cmp2erp"]) == 2

    def test_missing_file_exit2(self, tmp_path):
        assert run(["project", "--in", str(tmp_path / "nope.pgm"),
                    "--out", str(tmp_path / "o"),
                    "--direction", "erp2cmp"]) == 2


class TestFixations:
    CSV = ("video_id,frame_index,observer_id,lon_deg,lat_deg\n"
           "vid,0,obsA,0.0,0.0\n"
           "vid,0,obsB,45.0,10.0\n"
           "vid,1,obsA,-90.0,-30.0\n"
           "vid,2,obsA,500.0,0.0\n")  # bad lon: skipped, frame 2 dropped

    def test_writes_fixation_and_saliency(self, tmp_path, capsys):
        csv = tmp_path / "gaze.csv"
        csv.write_text(self.CSV)
        out = tmp_path / "gt"
        assert run(["fixations", "--csv", str(csv), "--out", str(out),
                    "--resolution", "128x64"]) == 0
        for sub in ("fixation", "saliency"):
            assert sorted(p.name for p in (out / "vid" / sub).iterdir()) == \
                ["00000.pgm", "00001.pgm"]
        fix = load_grid(out / "vid" / "fixation" / "00000.pgm")
        assert fix.sum() == 2.0
        sal = load_grid(out / "vid" / "saliency" / "00000.pgm")
        assert sal.max() == 1.0
        err = capsys.readouterr().err
        assert "line 5" in err

    def test_all_rows_invalid_exit2(self, tmp_path):
        csv = tmp_path / "gaze.csv"
        csv.write_text("video_id,frame_index,observer_id,lon_deg,lat_deg\n"
                       "v,x,o,0,0\n")
        assert run(["fixations", "--csv", str(csv),
                    "--out", str(tmp_path / "gt"),
                    "--resolution", "64x32"]) == 2

    def test_bad_resolution_exit2(self, tmp_path):
        csv = tmp_path / "gaze.csv"
        csv.write_text(self.CSV)
        assert run(["fixations", "--csv", str(csv),
                    "--out", str(tmp_path / "gt"),
                    "--resolution", "not-a-size"]) == 2

    def test_bad_header_exit2(self, tmp_path):
        csv = tmp_path / "gaze.csv"
        csv.write_text("lon,lat\n1,2\n")
        assert run(["fixations", "--csv", str(csv),
                    "--out", str(tmp_path / "gt"),
                    "--resolution", "64x32"]) == 2


class TestEval:
    def _make_run(self, tmp_path, rng):
        for sub in ("pred", "gt_sal", "gt_fix"):
            (tmp_path / sub).mkdir()
        for i in range(3):
            sal = rng.uniform(0, 1, (16, 32))
            gt = rng.uniform(0, 1, (16, 32))
            fix = np.zeros((16, 32))
            fix[rng.integers(16), rng.integers(32)] = 1.0
            name = f"{i:03d}.pgm"
            save_pgm(sal, tmp_path / "pred" / name)
            save_pgm(gt, tmp_path / "gt_sal" / name)
            save_pgm(fix, tmp_path / "gt_fix" / name)

    def test_csv_to_stdout_and_file(self, tmp_path, rng, capsys):
        self._make_run(tmp_path, rng)
        args = ["eval", "--pred", str(tmp_path / "pred"),
                "--gt-sal", str(tmp_path / "gt_sal"),
                "--gt-fix", str(tmp_path / "gt_fix")]
        assert run(args) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "frame,auc_j,nss,cc,sim,kld"
        assert out.strip().splitlines()[-1].startswith("MEAN,")
        report_path = tmp_path / "report.csv"
        assert run(args + ["--out", str(report_path)]) == 0
        assert report_path.read_text() == out

    def test_spherical_flag_changes_values(self, tmp_path, rng, capsys):
        self._make_run(tmp_path, rng)
        args = ["eval", "--pred", str(tmp_path / "pred"),
                "--gt-sal", str(tmp_path / "gt_sal"),
                "--gt-fix", str(tmp_path / "gt_fix")]
        run(args)
        plain = capsys.readouterr().out
        run(args + ["--spherical-weights"])
        sph = capsys.readouterr().out
        assert plain != sph
        # AUC column identical (never weighted)
        for a, b in zip(plain.splitlines()[1:], sph.splitlines()[1:]):
            assert a.split(",")[1] == b.split(",")[1]

    def test_empty_dirs_exit2(self, tmp_path):
        for sub in ("pred", "gt_sal", "gt_fix"):
            (tmp_path / sub).mkdir()
        assert run(["eval", "--pred", str(tmp_path / "pred"),
                    "--gt-sal", str(tmp_path / "gt_sal"),
                    "--gt-fix", str(tmp_path / "gt_fix")]) == 2


class TestRf:
    def test_reports_constants(self, capsys):
        assert run(["rf"]) == 0
        out = capsys.readouterr().out
        assert "rf  212" in out
        assert "rf  244" in out
        assert "rf  676" in out


class TestTrainAndInfer:
    def test_train_smoke_and_determinism(self, tmp_path, capsys):
        data = write_training_dir(tmp_path / "data", n_pairs=2)
        w1 = tmp_path / "w1.atsw"
        w2 = tmp_path / "w2.atsw"
        args = ["train", "--data", str(data), "--steps", "3",
                "--lr", "1e-4", "--seed", "7"]
        assert run(args + ["--out-weights", str(w1)]) == 0
        assert run(args + ["--out-weights", str(w2)]) == 0
        assert w1.read_bytes() == w2.read_bytes()
        out = capsys.readouterr().out
        assert "initial loss" in out and "final loss" in out

    def test_train_missing_layout_exit2(self, tmp_path):
        (tmp_path / "empty").mkdir()
        assert run(["train", "--data", str(tmp_path / "empty"),
                    "--out-weights", str(tmp_path / "w.atsw"),
                    "--steps", "1"]) == 2

    def test_infer_experts_stream(self, tmp_path, rng):
        from sal360 import experts
        model = experts.ExpertModel()
        store = {}
        store.update(model.init_weights("poles/", rng))
        store.update(model.init_weights("equator/", rng))
        wpath = tmp_path / "experts.atsw"
        save_weights(store, wpath)
        frames = tmp_path / "frames"
        frames.mkdir()
        save_pgm(smooth_erp(64, 128), frames / "f0.pgm")
        save_pgm(smooth_erp(64, 128, phase=1.0), frames / "f1.pgm")
        out = tmp_path / "maps"
        assert run(["infer", "--frames", str(frames), "--weights", str(wpath),
                    "--out", str(out), "--stream", "experts",
                    "--face-size", "32"]) == 0
        maps = sorted(p.name for p in out.iterdir())
        assert maps == ["f0.pgm", "f1.pgm"]
        m = load_grid(out / "f0.pgm")
        assert m.shape == (320, 640)
        assert 0.0 <= m.min() and m.max() <= 1.0

    def test_infer_wrong_stream_weights_exit2(self, tmp_path, rng):
        from sal360 import experts
        model = experts.ExpertModel()
        store = model.init_weights("poles/", rng)  # equator prefix missing
        wpath = tmp_path / "partial.atsw"
        save_weights(store, wpath)
        frames = tmp_path / "frames"
        frames.mkdir()
        save_pgm(smooth_erp(64, 128), frames / "f0.pgm")
        assert run(["infer", "--frames", str(frames), "--weights", str(wpath),
                    "--out", str(tmp_path / "o"), "--stream", "experts"]) == 2

    def test_infer_no_frames_exit2(self, tmp_path, rng):
        from sal360 import experts
        model = experts.ExpertModel()
        store = {}
        store.update(model.init_weights("poles/", rng))
        store.update(model.init_weights("equator/", rng))
        wpath = tmp_path / "w.atsw"
        save_weights(store, wpath)
        empty = tmp_path / "frames"
        empty.mkdir()
        assert run(["infer", "--frames", str(empty), "--weights", str(wpath),
                    "--out", str(tmp_path / "o"), "--stream", "experts"]) == 2

    def test_infer_missing_weights_exit2(self, tmp_path):
        assert run(["infer", "--frames", str(tmp_path),
                    "--weights", str(tmp_path / "nope.atsw"),
                    "--out", str(tmp_path / "o")]) == 2


class TestParser:
    def test_no_command_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.main([])
        assert exc.value.code == 2

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["frobnicate"])
        assert exc.value.code == 2
