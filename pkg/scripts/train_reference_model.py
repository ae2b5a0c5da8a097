#!/usr/bin/env python3
"""Train the 784-100-100-10 reference MLP with plain minibatch SGD.

The trained weights are checked into ``src/netcast/data/reference_model.txt``;
rerun this only to regenerate that artifact. It needs the MNIST training
split as IDX files::

    python scripts/train_reference_model.py --mnist-dir /path/to/mnist

The recorded per-layer input scales are the largest activation each layer
sees on the training set; the pipeline divides by them before encoding.
"""

import argparse
import logging

import numpy as np

from netcast.model import Layer, Model, forward_digital, layer_inputs_digital, load_dataset, save_model

log = logging.getLogger("train")


def softmax_xent_grad(logits, labels):
    z = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    loss = -np.mean(np.log(p[np.arange(len(labels)), labels] + 1e-12))
    p[np.arange(len(labels)), labels] -= 1.0
    return loss, p / len(labels)


def train(train_x, train_y, dims, epochs, lr, momentum, weight_decay, batch, seed):
    rng = np.random.default_rng(seed)
    ws = [rng.normal(0, np.sqrt(2.0 / m), size=(n, m)) for m, n in zip(dims[:-1], dims[1:])]
    bs = [np.zeros(n) for n in dims[1:]]
    vw = [np.zeros_like(w) for w in ws]
    vb = [np.zeros_like(b) for b in bs]
    n = len(train_y)
    for epoch in range(epochs):
        step = lr * 0.5 * (1 + np.cos(np.pi * epoch / epochs))
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            acts = [train_x[idx]]
            for k, (w, b) in enumerate(zip(ws, bs)):
                z = acts[-1] @ w.T + b
                acts.append(np.maximum(z, 0.0) if k < len(ws) - 1 else z)
            loss, delta = softmax_xent_grad(acts[-1], train_y[idx])
            total += loss * len(idx)
            for k in reversed(range(len(ws))):
                gw = delta.T @ acts[k] + weight_decay * ws[k]
                gb = delta.sum(axis=0)
                if k > 0:
                    delta = (delta @ ws[k]) * (acts[k] > 0)
                vw[k] = momentum * vw[k] - step * gw
                vb[k] = momentum * vb[k] - step * gb
                ws[k] += vw[k]
                bs[k] += vb[k]
        log.info("epoch %d loss %.4f", epoch, total / n)
    return ws, bs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mnist-dir", required=True)
    ap.add_argument("--out", default="src/netcast/data/reference_model.txt")
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--lr", type=float, default=0.05)
    ap.add_argument("--momentum", type=float, default=0.9)
    ap.add_argument("--weight-decay", type=float, default=1e-4)
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--seed", type=int, default=20221103)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    train_set = load_dataset(args.mnist_dir, split="train")
    test_set = load_dataset(args.mnist_dir, split="t10k")
    dims = (784, 100, 100, 10)
    ws, bs = train(train_set.images, train_set.labels, dims, args.epochs, args.lr,
                   args.momentum, args.weight_decay, args.batch, args.seed)

    draft = Model(tuple(Layer(w, b, "relu" if k < 2 else "identity") for k, (w, b) in enumerate(zip(ws, bs))))
    inputs = layer_inputs_digital(draft, train_set.images)
    scales = [1.0] + [float(a.max()) for a in inputs[1:]]

    acc_full = float(np.mean(np.argmax(forward_digital(draft, test_set.images), 1) == test_set.labels))
    acc_1000 = float(np.mean(np.argmax(forward_digital(draft, test_set.images[:1000]), 1) == test_set.labels[:1000]))
    metadata = {
        "baseline_accuracy": acc_full,
        "baseline_accuracy_first_1000": acc_1000,
        "training": {
            "optimizer": "sgd-momentum",
            "epochs": args.epochs,
            "lr": args.lr,
            "momentum": args.momentum,
            "weight_decay": args.weight_decay,
            "batch": args.batch,
            "seed": args.seed,
        },
        "input_scale_rule": "max activation over the training split",
        "pixel_normalization": "byte / 255",
    }
    model = Model(tuple(Layer(w, b, l.activation, s) for (w, b, l, s) in zip(ws, bs, draft.layers, scales)), metadata)
    save_model(model, args.out)
    log.info("test accuracy %.4f (first 1000: %.4f); wrote %s", acc_full, acc_1000, args.out)


if __name__ == "__main__":
    main()
