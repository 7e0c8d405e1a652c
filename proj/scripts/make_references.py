#!/usr/bin/env python3
# Apache License, Version 2.0, refer to LICENSE.txt
"""Writes reference posterior draws for the bundled corpus (references/*.csv).

The multimodal model is sampled exactly. The others use emcee's ensemble
sampler on the unconstrained log density, long runs thinned to 10,000 draws.
Columns follow the samples CSV convention (docs/samples-format.md).
"""

import argparse
import json
import pathlib

import emcee
import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_expit, logsumexp

ROOT = pathlib.Path(__file__).resolve().parent.parent
MODELS = ROOT / "models"
OUT = ROOT / "references"
NUM_DRAWS = 10_000


def normal_lpdf(x, mu, sigma):
    return -0.5 * ((x - mu) / sigma) ** 2 - np.log(sigma) - 0.5 * np.log(2 * np.pi)


def write(name, columns, draws, source):
    draws = np.asarray(draws)
    assert draws.shape == (NUM_DRAWS, len(columns)), draws.shape
    with open(OUT / f"{name}.csv", "w") as f:
        f.write(f"# source={source}\n")
        f.write(",".join(columns) + "\n")
        for row in draws:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def ensemble(log_prob, dim, rng, walkers=80, burn=5_000, steps=40_000):
    # Walkers start in a small ball around the best of several MAP searches;
    # a walker started near a minor local mode never leaves it.
    starts = 2.0 * rng.standard_normal((20, dim))
    fits = [minimize(lambda u: -log_prob(u[None, :])[0], s, method="Nelder-Mead",
                     options={"maxiter": 20_000, "xatol": 1e-8, "fatol": 1e-10}) for s in starts]
    best = min(fits, key=lambda f: f.fun).x
    p0 = best + 1e-3 * rng.standard_normal((walkers, dim))
    sampler = emcee.EnsembleSampler(walkers, dim, log_prob, vectorize=True)
    sampler.random_state = np.random.RandomState(int(rng.integers(2**31))).get_state()
    sampler.run_mcmc(p0, burn + steps)
    tau = sampler.get_autocorr_time(discard=burn, quiet=True)
    chain = sampler.get_chain(discard=burn)  # (steps, walkers, dim)
    per_walker = NUM_DRAWS // walkers
    idx = np.linspace(0, steps - 1, per_walker).round().astype(int)
    print(f"  max autocorrelation time {np.max(tau):.1f}, "
          f"kept every {steps // per_walker}th step of each walker")
    return chain[idx].reshape(-1, dim)


def multimodal(rng):
    cluster = rng.standard_normal(NUM_DRAWS)
    theta = rng.normal(np.where(cluster > 0, 20.0, 0.0), 1.0)
    write("multimodal", ["cluster", "theta"], np.column_stack([cluster, theta]),
          "exact draws")


def eight_schools(rng):
    d = json.loads((MODELS / "eight_schools.data.json").read_text())
    y, sigma = np.array(d["y"], float), np.array(d["sigma"], float)

    def log_prob(u):
        mu, log_tau, tt = u[:, 0], u[:, 1], u[:, 2:]
        tau = np.exp(log_tau)
        theta = mu[:, None] + tau[:, None] * tt
        lp = normal_lpdf(mu, 0, 5)
        lp += -np.log1p((tau / 5) ** 2) + log_tau  # half-Cauchy kernel and Jacobian
        lp += normal_lpdf(tt, 0, 1).sum(axis=1)
        lp += normal_lpdf(y, theta, sigma).sum(axis=1)
        return lp

    u = ensemble(log_prob, 10, rng, steps=100_000)
    tau = np.exp(u[:, 1])
    theta = u[:, :1] + tau[:, None] * u[:, 2:]
    cols = (["mu", "tau"] + [f"theta_tilde.{j}" for j in range(1, 9)]
            + [f"theta.{j}" for j in range(1, 9)])
    write("eight_schools", cols, np.column_stack([u[:, 0], tau, u[:, 2:], theta]),
          "emcee ensemble sampler")


def linear_regression(rng):
    d = json.loads((MODELS / "linear_regression.data.json").read_text())
    x, y = np.array(d["x"], float), np.array(d["y"], float)
    k = x.shape[1]

    def log_prob(u):
        alpha, beta, log_sigma = u[:, 0], u[:, 1:1 + k], u[:, 1 + k]
        sigma = np.exp(log_sigma)
        mean = beta @ x.T + alpha[:, None]
        lp = normal_lpdf(alpha, 0, 10) + normal_lpdf(beta, 0, 10).sum(axis=1)
        lp += -sigma + log_sigma
        lp += normal_lpdf(y, mean, sigma[:, None]).sum(axis=1)
        return lp

    u = ensemble(log_prob, k + 2, rng)
    sigma = np.exp(u[:, 1 + k])
    y_rep1 = rng.normal(u[:, 0] + u[:, 1:1 + k] @ x[0], sigma)
    cols = ["alpha"] + [f"beta.{j}" for j in range(1, k + 1)] + ["sigma", "y_rep1"]
    write("linear_regression", cols, np.column_stack([u[:, :1 + k], sigma, y_rep1]),
          "emcee ensemble sampler")


def mixture(rng):
    d = json.loads((MODELS / "mixture.data.json").read_text())
    y = np.array(d["y"], float)

    def log_prob(u):
        a, mu1, z, log_sigma = u.T
        w1 = expit(a)
        mu2 = mu1 + np.exp(z)
        sigma = np.exp(log_sigma)
        lp = log_expit(a) + log_expit(-a) + z + log_sigma  # Jacobians
        lp += -0.5 * log_sigma**2 - log_sigma - 0.5 * np.log(2 * np.pi)
        lp += normal_lpdf(mu1, 0, 5) + normal_lpdf(mu2, 0, 5)
        comp = np.stack([np.log(w1)[:, None] + normal_lpdf(y, mu1[:, None], sigma[:, None]),
                         np.log1p(-w1)[:, None] + normal_lpdf(y, mu2[:, None], sigma[:, None])])
        lp += logsumexp(comp, axis=0).sum(axis=1)
        return lp

    u = ensemble(log_prob, 4, rng)
    w1 = expit(u[:, 0])
    mu2 = u[:, 1] + np.exp(u[:, 2])
    write("mixture", ["w.1", "w.2", "mu.1", "mu.2", "sigma"],
          np.column_stack([w1, 1 - w1, u[:, 1], mu2, np.exp(u[:, 3])]),
          "emcee ensemble sampler")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()
    OUT.mkdir(exist_ok=True)
    rng = np.random.default_rng(args.seed)
    for f in (multimodal, eight_schools, linear_regression, mixture):
        print(f.__name__)
        f(rng)


if __name__ == "__main__":
    main()
