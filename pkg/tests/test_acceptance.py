"""Acceptance criteria 1-10, each at its stated tolerance and time budget.

Every test records one PASS/FAIL line, printed in the pytest terminal summary
(or directly when run as ``python tests/test_acceptance.py``).
"""

import hashlib
import itertools
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import pr_ap

from ffd.geometry import BoxAbs, TileGrid, assign_tile, denormalize_box, iou, normalize_box


def record(num, title, ok, detail, elapsed, sub=0):
    status = "PASS" if ok else "FAIL"
    line = f"[{status}] {num:>2}. {title}: {detail} ({elapsed:.2f}s)"
    ACCEPTANCE_LINES[(num, sub)] = line
    print(line)
    assert ok, line


def test_01_hungarian_oracle():
    from ffd.matching import hungarian

    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(200):
        g = int(rng.integers(1, 6))
        n = int(rng.integers(g, 9))
        cost = rng.uniform(-10, 10, (g, n))
        brute = min(sum(cost[i, p[i]] for i in range(g))
                    for p in itertools.permutations(range(n), g))
        worst = max(worst, abs(hungarian(cost).total_cost(cost) - brute))
    dt = time.perf_counter() - t0
    record(1, "Hungarian vs brute force (200 matrices)", worst <= 1e-9 and dt < 10,
           f"max |diff| = {worst:.1e}", dt)


def test_02_coordinate_round_trip():
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    grid = TileGrid.for_image(320, 256, 32)
    worst = 0.0
    for _ in range(1000):
        b = BoxAbs(rng.uniform(0, 320), rng.uniform(0, 256), rng.uniform(1, 320),
                   rng.uniform(1, 256))
        tile = assign_tile(b, grid)
        back = denormalize_box(normalize_box(b, tile, grid), tile, grid)
        bn = (rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(-5, 0), rng.uniform(-5, 0))
        bn_back = normalize_box(denormalize_box(bn, tile, grid), tile, grid)
        worst = max(worst, np.abs(np.subtract(back, b)).max(),
                    np.abs(np.subtract(bn_back, bn)).max())
    dt = time.perf_counter() - t0
    record(2, "box encode/decode round trip (1000 pairs)", worst <= 1e-5 and dt < 1,
           f"max coord error = {worst:.1e}", dt)


def test_03_gradient_suite():
    from ffd.gradsuite import run_suite

    t0 = time.perf_counter()
    results = run_suite(seed=0, dtype=np.float64, include_detector=True)
    dt = time.perf_counter() - t0
    worst = max(results, key=lambda r: r.max_rel_error)
    ok = all(r.max_rel_error < 1e-4 and r.checked > 0 for r in results) and dt < 120
    record(3, f"gradient suite ({len(results)} checks incl. composed detector)", ok,
           f"worst {worst.name} = {worst.max_rel_error:.1e}", dt)


def test_04_synthesis_invariants():
    from ffd.data import extract_instances
    from ffd.synth import SynthConfig, patches_from_sample, synthesize_scene, verify_overlap_free
    from ffd.toydata import background, fruit_source

    t0 = time.perf_counter()
    rng = np.random.default_rng(104)
    pool = [fruit_source(rng, (128, 128), n_fruit=6) for _ in range(4)]
    patch_pool = [patches_from_sample(s) for s in pool]
    bases = [background(rng, (128, 128)) for _ in range(3)]
    cfg = SynthConfig(n_max=100)
    failures = []
    total = 0
    for k in range(500):
        srng = np.random.default_rng(np.random.SeedSequence([104, k]))
        base = bases[int(srng.integers(len(bases)))]
        image, anns, mask = synthesize_scene(base, patch_pool, cfg, srng)
        total += len(anns)
        if not verify_overlap_free(anns) or len(anns) >= cfg.n_max:
            failures.append((k, "overlap/count"))
        if not np.array_equal(image[mask == 0], base[mask == 0]):
            failures.append((k, "base not preserved"))
        if [b for _, _, b in extract_instances(mask)] != [b for b, _ in anns]:
            failures.append((k, "mask/annotation mismatch"))
    dt = time.perf_counter() - t0
    record(4, "synthesis invariants (500 scenes, N_max=100)", not failures and dt < 120,
           f"{total} instances, {len(failures)} violations", dt)


def test_05_ap_oracle():
    from ffd.metrics import AREA_BANDS, COCO_THRESHOLDS, Detection, GroundTruth, \
        coco_style_report

    t0 = time.perf_counter()
    rng = np.random.default_rng(105)
    worst, mismatched = 0.0, 0
    for _ in range(100):
        gts = [GroundTruth(BoxAbs(rng.uniform(0, 80), rng.uniform(0, 80), s, s * rng.uniform(.7, 1.4)),
                           1, 0)
               for s in rng.choice([6.0, 18.0, 40.0], size=int(rng.integers(0, 11)))]
        dets = []
        for _ in range(int(rng.integers(0, 21))):
            if gts and rng.random() < 0.6:
                g = gts[int(rng.integers(len(gts)))].box
                box = BoxAbs(g.cx + rng.normal(0, 2), g.cy + rng.normal(0, 2),
                             g.w * rng.uniform(.8, 1.2), g.h * rng.uniform(.8, 1.2))
            else:
                box = BoxAbs(rng.uniform(0, 80), rng.uniform(0, 80), rng.uniform(2, 50),
                             rng.uniform(2, 50))
            dets.append(Detection(box, 1, float(rng.uniform()), 0))
        rep = coco_style_report(dets, gts)
        d = [(0, tuple(x.box), x.score) for x in dets]
        g = [(0, tuple(x.box)) for x in gts]
        for band, got in (("all", rep.AP), ("small", rep.AP_S), ("medium", rep.AP_M),
                          ("large", rep.AP_L)):
            vals = [pr_ap(d, g, t, AREA_BANDS[band]) for t in COCO_THRESHOLDS]
            want = None if vals[0] is None else float(np.mean(vals))
            if (want is None) != (got is None):
                mismatched += 1
            elif want is not None:
                worst = max(worst, abs(want - got))
    dt = time.perf_counter() - t0
    record(5, "COCO-style AP vs brute-force PR oracle (100 scenes)",
           worst <= 1e-9 and mismatched == 0 and dt < 30,
           f"max |diff| = {worst:.1e}, undefined-band mismatches = {mismatched}", dt)


def test_06_query_counts():
    from ffd.backbone import BackboneConfig
    from ffd.head import N_G_PRESETS
    from ffd.head_index import query_count

    t0 = time.perf_counter()
    got = {}
    for tile in (16, 32, 64):
        cfg = BackboneConfig(tile=tile, input_size=(256, 320)).validate()
        got[tile] = query_count(cfg.output_size, N_G_PRESETS[tile])
    dt = time.perf_counter() - t0
    record(6, "query counts at 320x256 for tiles 16/32/64",
           got == {16: 1600, 32: 800, 64: 400}, f"{got[16]}/{got[32]}/{got[64]}", dt)


OVERFIT_ITERATIONS = 500


def test_07_toy_overfit():
    from ffd.config import toy_config
    from ffd.inference import infer
    from ffd.metrics import Detection, GroundTruth, ap_at_iou
    from ffd.toydata import toy_dataset
    from ffd.train import train

    t0 = time.perf_counter()
    samples = toy_dataset(10, seed=7)
    cfg = toy_config(iterations=OVERFIT_ITERATIONS, batch_size=10, seed=0)
    model = train(cfg, samples).model
    dets, gts, worst_dup = [], [], 0
    for i, s in enumerate(samples):
        dets += infer(model, s.image, 0.0, i)
        gts += [GroundTruth(BoxAbs(*b), c, i) for b, c in s.annotations]
        confident = infer(model, s.image, 0.5, i)
        for b, _ in s.annotations:
            worst_dup = max(worst_dup, sum(iou(d.box, b) >= 0.5 for d in confident))
    ap50 = ap_at_iou(dets, gts, 0.5)
    dt = time.perf_counter() - t0
    ok = ap50 >= 0.90 and worst_dup <= 1 and dt < 900
    record(7, f"toy overfit ({OVERFIT_ITERATIONS} iterations, no NMS)", ok,
           f"AP@0.5 = {ap50:.3f}, max detections per gt = {worst_dup}", dt)


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_08_smooth_l1_continuity(beta):
    from ffd.numerics import smooth_l1_elementwise

    t0 = time.perf_counter()
    d = np.float64(beta)
    quadratic = 0.5 * d * d / beta
    linear = abs(d) - 0.5 * beta
    kernel = float(smooth_l1_elementwise(d, beta))
    gap = max(abs(quadratic - linear), abs(kernel - linear))
    dt = time.perf_counter() - t0
    record(8, f"smooth-L1 branches meet at |d| = beta = {beta}",
           gap <= np.finfo(np.float64).eps * beta, f"gap = {gap:.1e}", dt, sub=beta)


def test_09_determinism(tmp_path):
    from ffd.cli import main
    from ffd.config import toy_config

    t0 = time.perf_counter()
    hashes = []
    for run in ("a", "b"):
        ds = tmp_path / run / "data"
        assert main(["synth", "--toy", "--count", "6", "--seed", "5", "--n-max", "6",
                     "--out", str(ds)]) == 0
        cfg = tmp_path / run / "cfg.json"
        cfg.write_text(toy_config(iterations=15, batch_size=3, seed=5).to_json())
        assert main(["train", "--config", str(cfg), "--data", str(ds),
                     "--out", str(tmp_path / run / "out")]) == 0
        h = hashlib.sha256()
        for f in sorted((ds / "images").iterdir()) + sorted((ds / "masks").iterdir()):
            h.update(f.read_bytes())
        hashes.append((h.hexdigest(), hashlib.sha256(
            (tmp_path / run / "out" / "checkpoint.ffd").read_bytes()).hexdigest()))
    dt = time.perf_counter() - t0
    record(9, "fixed-seed synth + train bitwise reproducible", hashes[0] == hashes[1],
           f"checkpoint sha256 {hashes[0][1][:12]} vs {hashes[1][1][:12]}", dt)


def test_10_squeeze_ablation():
    from ffd import numerics as nx
    from ffd.head import LORConfig, build_head, ccgc, lor_forward

    t0 = time.perf_counter()
    rng = np.random.default_rng(110)
    x = nx.Tensor(rng.standard_normal((24, 3, 4)).astype(np.float32))
    heads = {sq: build_head(LORConfig(d=4, n_g=6, squeeze=sq), 24, np.random.default_rng(3))
             for sq in ("sigmoid", "softmax")}
    same_params = all(np.array_equal(heads["sigmoid"].params[k].data, v.data)
                      for k, v in heads["softmax"].params.items())
    p = heads["softmax"].params
    y = nx.Tensor(rng.standard_normal((24, 3, 4)))
    gates = {sq: ccgc(y, p["lor0.expand.weight"], p["lor0.expand.bias"],
                      p["lor0.squeeze.weight"], p["lor0.squeeze.bias"], sq).data
             for sq in ("sigmoid", "softmax")}
    soft_sum = abs(float(gates["softmax"].sum()) - 1.0)
    sig_range = bool(np.all((gates["sigmoid"] > 0) & (gates["sigmoid"] < 1)))
    outputs_differ = not np.array_equal(lor_forward(x, heads["sigmoid"]).data,
                                        lor_forward(x, heads["softmax"]).data)
    dt = time.perf_counter() - t0
    ok = same_params and soft_sum < 1e-6 and sig_range and outputs_differ
    record(10, "squeeze switch changes only the gate", ok,
           f"softmax |sum-1| = {soft_sum:.1e}, sigmoid gates in (0,1) = {sig_range}", dt)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
