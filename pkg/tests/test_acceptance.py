"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line (visible with pytest -s or -rA). The
finite-difference comparisons use the loop-based oracle from conftest,
kept independent of the package's own gradcheck harness.
"""

import time

import numpy as np
import pytest

from texkit import (AttentionParams, BinningConfig, GrayImage, Offset, OffsetGrid,
                    OptimizeConfig, PixelDomain, attention_forward, frechet_distance,
                    save_image, soft_glcm_backward, soft_glcm_forward, texture_loss,
                    texture_loss_backward, texture_match_optimize, texture_matrix,
                    texture_matrix_backward, welch_test)
from texkit import alignment_workflow
from texkit.cli import main as cli_main
from texkit.radiomics import FeatureTable

from conftest import (central_difference, hard_glcm_oracle, make_constant, make_stripes,
                      max_rel_err, random_image)
from test_stats import WELCH_REFERENCE, gaussian_tables


def report(name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f"  ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


class TestAcceptance:
    def test_c1_glcm_oracle_equivalence(self):
        start = time.perf_counter()
        bins = BinningConfig.uniform(32)
        spacing = bins.bin_centers[1] - bins.bin_centers[0]
        tiny = BinningConfig(bins.bin_centers, sigma=spacing / 100)
        rng = np.random.default_rng(2024)
        worst = 0.0
        for trial in range(3):
            data = rng.choice(bins.bin_centers, size=(16, 16))
            img = GrayImage(data, PixelDomain.NORMALIZED)
            for off in OffsetGrid().offsets():
                soft = soft_glcm_forward(img, off, tiny)
                hard, pairs = hard_glcm_oracle(img, off.d, off.theta, bins.bin_centers)
                assert soft.valid_pairs == pairs
                worst = max(worst, float(np.abs(soft.matrix - hard).max()))
        elapsed = time.perf_counter() - start
        report("GLCM oracle equivalence (16 offsets, 16x16, sigma=spacing/100)",
               worst < 1e-6 and elapsed < 5.0,
               f"max |diff| = {worst:.2e}, {elapsed:.2f}s")

    def test_c2_normalization_over_random_images(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(100):
            n = int(rng.integers(4, 12))
            img = random_image(rng, n, bound=1.0)
            d = int(rng.integers(1, 3))
            theta = int(rng.choice([0, 45, 90, 135]))
            n_bins = int(rng.integers(2, 16))
            out = soft_glcm_forward(img, Offset(d, theta), BinningConfig.uniform(n_bins))
            worst = max(worst, abs(float(out.matrix.sum()) - 1.0))
        report("GLCM normalization: sum = 1 over 100 random images",
               worst < 1e-6, f"max |sum-1| = {worst:.2e}")

    def test_c3_gradient_suite(self):
        start = time.perf_counter()
        worst = {}

        def track(name, err):
            worst[name] = max(worst.get(name, 0.0), err)

        # 7 soft-GLCM instances.
        for seed in range(7):
            rng = np.random.default_rng(seed)
            bins = BinningConfig.uniform(8)
            img = random_image(rng, 8)
            off = Offset(int(rng.integers(1, 4)), int(rng.choice([0, 45, 90, 135])))
            upstream = rng.standard_normal((8, 8))
            analytic = soft_glcm_backward(img, off, bins, upstream)

            def f(data, off=off, bins=bins, upstream=upstream):
                out = soft_glcm_forward(GrayImage(data, PixelDomain.NORMALIZED), off, bins)
                return float((upstream * out.matrix).sum())

            track("soft_glcm.image", max_rel_err(analytic, central_difference(f, img.data)))

        # 7 texture-matrix instances.
        grid = OffsetGrid(distances=(1, 2), angles=(0, 45, 90, 135))
        for seed in range(7, 14):
            rng = np.random.default_rng(seed)
            bins = BinningConfig.uniform(8)
            img = random_image(rng, 8)
            upstream = rng.standard_normal(grid.shape)
            analytic = texture_matrix_backward(img, grid, bins, upstream)

            def f(data, bins=bins, upstream=upstream):
                tm = texture_matrix(GrayImage(data, PixelDomain.NORMALIZED), grid, bins)
                return float((upstream * tm.values).sum())

            track("texture_matrix.image", max_rel_err(analytic, central_difference(f, img.data)))

        # 6 full-loss instances: images and all parameter blocks.
        h = 1e-4
        for seed in range(14, 20):
            rng = np.random.default_rng(seed)
            bins = BinningConfig.uniform(8)
            a, b = random_image(rng, 8), random_image(rng, 8)
            params = AttentionParams.initialize(c=4, seed=seed).replace(
                gamma=float(rng.uniform(-0.5, 0.5)))
            out = texture_loss(a, b, grid, bins, params)
            grad_a, grad_b, pgrads = texture_loss_backward(out)

            def loss_of(img_a=a, img_b=b, p=params):
                return texture_loss(img_a, img_b, grid, bins, p).loss

            track("texture_loss.img_a", max_rel_err(grad_a, central_difference(
                lambda d: loss_of(img_a=GrayImage(d, PixelDomain.NORMALIZED)), a.data)))
            track("texture_loss.img_b", max_rel_err(grad_b, central_difference(
                lambda d: loss_of(img_b=GrayImage(d, PixelDomain.NORMALIZED)), b.data)))
            for name in ("w_q", "w_k"):
                vec = getattr(params, name)
                num = np.zeros_like(vec)
                for i in range(vec.size):
                    up, dn = vec.copy(), vec.copy()
                    up[i] += h
                    dn[i] -= h
                    num[i] = (loss_of(p=params.replace(**{name: up}))
                              - loss_of(p=params.replace(**{name: dn}))) / (2 * h)
                track(f"texture_loss.{name}", max_rel_err(pgrads[name], num))
            for name in ("w_v", "gamma"):
                val = getattr(params, name)
                num = (loss_of(p=params.replace(**{name: val + h}))
                       - loss_of(p=params.replace(**{name: val - h}))) / (2 * h)
                track(f"texture_loss.{name}", max_rel_err(pgrads[name], num))

        elapsed = time.perf_counter() - start
        overall = max(worst.values())
        report("gradient suite: 20 instances, all blocks vs central differences",
               overall < 1e-4 and elapsed < 60.0,
               f"max rel err = {overall:.2e}, {elapsed:.1f}s")

    def test_c4_loss_identities(self):
        rng = np.random.default_rng(3)
        grid = OffsetGrid(distances=(1, 2), angles=(0, 45, 90, 135))
        bins = BinningConfig.uniform(8)
        img_a, img_b = random_image(rng, 8), random_image(rng, 8)
        params = AttentionParams.initialize(c=4, seed=0).replace(gamma=0.5)

        identical = texture_loss(img_a, img_a, grid, bins, params).loss == 0.0

        p0 = params.replace(gamma=0.0)
        out0 = texture_loss(img_a, img_b, grid, bins, p0)
        l1 = np.abs(texture_matrix(img_a, grid, bins).values
                    - texture_matrix(img_b, grid, bins).values).sum()
        gamma0 = abs(out0.loss - l1) < 1e-9

        out = texture_loss(img_a, img_b, grid, bins, params)
        rows = np.abs(out.attention_map.sum(axis=1) - 1.0).max() < 1e-6

        delta = rng.uniform(0, 3, (2, 4))
        p4 = AttentionParams(w_q=[0.2, -0.1, 0.4, 0.05], w_k=[0.3, 0.2, -0.25, 0.1],
                             w_v=0.5, gamma=0.7)
        alpha = float(p4.w_q @ p4.w_k)
        p1 = AttentionParams(w_q=[alpha], w_k=[1.0], w_v=0.5, gamma=0.7)
        collapse = np.array_equal(attention_forward(delta, p4).attention_map,
                                  attention_forward(delta, p1).attention_map)

        report("loss identities: zero pair, gamma=0 L1, softmax rows, channel collapse",
               identical and gamma0 and rows and collapse,
               f"identical={identical} gamma0={gamma0} rows={rows} collapse={collapse}")

    def test_c5_optimizer_demo(self):
        start = time.perf_counter()
        src = make_constant(16, 0.1)
        tgt = make_stripes(16, amp=0.5, period=4)
        traj = texture_match_optimize(src, tgt, OffsetGrid(), BinningConfig.uniform(8),
                                      cfg=OptimizeConfig())
        elapsed = time.perf_counter() - start
        ratio = traj.losses[-1] / traj.losses[0]
        monotone = bool(np.all(np.diff(traj.losses) <= 0))
        report("optimizer demo: constant vs stripes, 500 iterations",
               ratio <= 0.1 and monotone and elapsed < 30.0,
               f"loss {traj.losses[0]:.2f} -> {traj.losses[-1]:.2f} "
               f"(ratio {ratio:.3f}), monotone={monotone}, {elapsed:.1f}s")

    def test_c6_welch_oracle(self):
        worst = 0.0
        for a, b, t, dof, p in WELCH_REFERENCE:
            r = welch_test(a, b)
            worst = max(worst, abs(r.t_stat - t), abs(r.dof - dof), abs(r.p_value - p))
        identical = welch_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]).p_value == 1.0
        report("Welch oracle: 10 frozen reference pairs within 1e-6",
               worst < 1e-6 and identical, f"max |diff| = {worst:.2e}")

    def test_c7_frechet_closed_form(self):
        rng = np.random.default_rng(5)
        worst_1d = 0.0
        for _ in range(20):
            m1, m2 = rng.normal(0, 3, 2)
            s1, s2 = rng.uniform(0.1, 4, 2)
            got = frechet_distance([m1], [[s1 ** 2]], [m2], [[s2 ** 2]])
            worst_1d = max(worst_1d, abs(got - ((m1 - m2) ** 2 + (s1 - s2) ** 2)))

        a = rng.standard_normal((4, 4))
        cov = a @ a.T + 0.3 * np.eye(4)
        mu = rng.standard_normal(4)
        self_dist = abs(frechet_distance(mu, cov, mu, cov))

        b = rng.standard_normal((4, 4))
        cov_g = b @ b.T + 0.3 * np.eye(4)
        mu_g = rng.standard_normal(4)
        asym = abs(frechet_distance(mu, cov, mu_g, cov_g)
                   - frechet_distance(mu_g, cov_g, mu, cov))

        report("Frechet closed form, self-distance, symmetry",
               worst_1d < 1e-8 and self_dist < 1e-8 and asym < 1e-8,
               f"1d={worst_1d:.2e} self={self_dist:.2e} asym={asym:.2e}")

    def test_c8_alignment_workflow(self):
        names = [f"f{i:02d}" for i in range(12)]
        shifts = np.where(np.arange(12) < 8, 1.0, 0.0)

        rng = np.random.default_rng(42)
        before = gaussian_tables(rng, names, shifts)
        half = shifts.copy()
        half[:4] = 0.0
        after = gaussian_tables(rng, names, half)
        mc = alignment_workflow(before, after, alpha=0.01)

        rng = np.random.default_rng(0)
        before = gaussian_tables(rng, names, shifts)
        all_fixed = alignment_workflow(before, gaussian_tables(rng, names, np.zeros(12)),
                                       alpha=0.01)
        rng = np.random.default_rng(1)
        before = gaussian_tables(rng, names, shifts)
        none_fixed = alignment_workflow(
            before, gaussian_tables(np.random.default_rng(2), names, shifts), alpha=0.01)

        ok = (35.0 <= mc.percentage <= 65.0 and all_fixed.percentage == 100.0
              and none_fixed.percentage == 0.0)
        report("alignment workflow: Monte-Carlo 50% and degenerate 100/0",
               ok, f"mc={mc.percentage:.1f}% full={all_fixed.percentage} none={none_fixed.percentage}")

    def test_c9_cli_determinism(self, tmp_path, capsys):
        stripe = tmp_path / "s.img"
        flat = tmp_path / "c.img"
        save_image(make_stripes(16), stripe)
        save_image(make_constant(16, 0.1), flat)
        table = tmp_path / "t.csv"
        table.write_text(FeatureTable(["a", "b", "c"], ["x", "y"],
                                      [[1.0, 2.0], [2.0, 1.0], [3.0, 4.0]]).to_csv())
        moments = tmp_path / "m.csv"
        moments.write_text("0.5,1.0\n1.0,0.2\n0.2,2.0\n")
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n_bins = 8\niterations = 5\nseed = 3\n")
        pgm = tmp_path / "in.pgm"
        pgm.write_bytes(b"P5\n2 2\n65535\n" + b"".join(
            v.to_bytes(2, "big") for v in (0, 512, 1024, 2048)))

        commands = [
            ["loss", str(stripe), str(flat), "--config", str(cfg),
             "-o", str(tmp_path / "delta.csv")],
            ["texture", str(stripe), "--config", str(cfg), "-o", str(tmp_path / "t2.csv")],
            ["glcm", str(stripe), "--config", str(cfg), "-o", str(tmp_path / "g.csv")],
            ["preprocess", str(pgm), str(tmp_path / "pp.img"), "--canvas", "4"],
            ["optimize", str(flat), str(stripe), "--config", str(cfg),
             "--out-image", str(tmp_path / "o.img"), "--trajectory", str(tmp_path / "tr.csv")],
            ["features", str(stripe), str(flat), "--config", str(cfg),
             "-o", str(tmp_path / "f.csv")],
            ["welch", str(table), str(table), "-o", str(tmp_path / "w.csv")],
            ["align", str(table), str(table), str(table), str(table),
             "-o", str(tmp_path / "a.csv")],
            ["frechet", str(moments), str(moments)],
            ["gradcheck", "--op", "texture_loss", "--config", str(cfg)],
        ]

        all_ok = True
        for argv in commands:
            def snapshot():
                code = cli_main(list(argv))
                captured = capsys.readouterr()
                outputs = {p.name: p.read_bytes() for p in tmp_path.iterdir()
                           if p.suffix in (".csv", ".img") and p.name not in
                           ("s.img", "c.img", "in.pgm")}
                return code, captured.out, outputs

            first, second = snapshot(), snapshot()
            same = first == second and first[0] == 0
            all_ok = all_ok and same
            if not same:
                print(f"  mismatch for: {' '.join(argv[:2])}")
        report("CLI determinism: byte-identical repeat runs for all subcommands", all_ok)
