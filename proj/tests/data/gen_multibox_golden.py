"""Writes multibox_golden.json: random instances with matches and losses
computed here in numpy. Run from this directory; output is deterministic."""

import json

import numpy as np

THRESHOLD = 0.5


def iou(a, b):
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


def match(pred, truth):
    out = [-1] * len(pred)
    if not truth:
        return out
    m = np.array([[iou(p, g) for g, _ in truth] for p in pred])
    work = m.copy()
    for _ in range(len(truth)):
        i, j = np.unravel_index(np.argmax(work), work.shape)
        if work[i, j] <= 0:
            break
        out[i] = int(j)
        work[i, :] = -1
        work[:, j] = -1
    for i in range(len(pred)):
        if out[i] < 0 and m[i].max() >= THRESHOLD:
            out[i] = int(np.argmax(m[i]))
    return out


def xent(logits, target):
    z = np.asarray(logits)
    return float(np.logaddexp.reduce(z) - z[target])


def encode(g, d):
    gw, gh = g[2] - g[0], g[3] - g[1]
    dw, dh = d[2] - d[0], d[3] - d[1]
    return np.array([((g[0] + g[2]) - (d[0] + d[2])) / 2 / dw,
                     ((g[1] + g[3]) - (d[1] + d[3])) / 2 / dh,
                     np.log(gw / dw), np.log(gh / dh)])


def smooth_l1(x):
    a = np.abs(x)
    return np.where(a < 1, 0.5 * x * x, a - 0.5)


def random_box(rng, near=None):
    if near is not None:
        c = np.array([(near[0] + near[2]) / 2, (near[1] + near[3]) / 2]) + rng.normal(0, 0.04, 2)
        wh = np.array([near[2] - near[0], near[3] - near[1]]) * np.exp(rng.normal(0, 0.2, 2))
    else:
        c = rng.uniform(0.15, 0.85, 2)
        wh = rng.uniform(0.05, 0.3, 2)
    lo = np.clip(c - wh / 2, 0.0, 0.98)
    hi = np.clip(c + wh / 2, lo + 0.01, 1.0)
    return [float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])]


def main():
    rng = np.random.default_rng(2021)
    cases = []
    for _ in range(40):
        classes = int(rng.integers(2, 6))
        truth = [(random_box(rng), int(rng.integers(1, classes))) for _ in range(int(rng.integers(0, 4)))]
        pred = []
        for _ in range(int(rng.integers(1, 7))):
            if truth and rng.random() < 0.6:
                pred.append(random_box(rng, truth[int(rng.integers(len(truth)))][0]))
            else:
                pred.append(random_box(rng))
        conf = rng.normal(0, 2, (len(pred), classes)).tolist()
        alpha = float(rng.choice([0.0, 0.5, 1.0, 2.0]))
        m = match(pred, truth)
        lconf = sum(xent(conf[i], truth[m[i]][1] if m[i] >= 0 else 0) for i in range(len(pred)))
        lloc = sum(float(smooth_l1(encode(truth[m[i]][0], pred[i])).sum())
                   for i in range(len(pred)) if m[i] >= 0)
        n = sum(1 for v in m if v >= 0)
        total = (lconf + alpha * lloc) / n if n else 0.0
        cases.append({
            "instance": {
                "predicted": [{"box": p, "confidences": c} for p, c in zip(pred, conf)],
                "ground_truth": [{"box": g, "class": k} for g, k in truth],
                "alpha": alpha,
            },
            "expected": {"match": m, "n": n, "confidence": lconf, "localization": lloc, "total": total},
        })
    with open("multibox_golden.json", "w") as f:
        json.dump(cases, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
