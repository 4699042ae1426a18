"""Command-line front end.

Exit codes: 0 success, 2 usage or domain error, 3 numerical non-convergence.
Relative output paths resolve against the config ``output_path`` or, failing
that, ``$SSBLAB_OUTPUT_DIR``.
"""

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import characterize, channel, codes, fileio, keying, scenario, security
from .errors import ConvergenceError, SSBError
from .lattice import auto_params, params_from_spec, sample_watermark
from .numerics import QuadratureSpec, RngStream

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
OUTPUT_DIR_ENV = "SSBLAB_OUTPUT_DIR"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Settings shared by all commands; a JSON file may supply any subset."""

    L: int = 512
    M_prime: int = 256
    delta_coarse: float = math.inf
    delta_fine: float = math.inf
    kappa: int = 10
    seed: int = 0
    output_path: str = ""
    quad_tolerance: float = 1e-10
    outlier_tolerance: float = security.DEFAULT_TOL

    @classmethod
    def from_json(cls, doc):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**{k: _coerce(k, v) for k, v in doc.items()})
        cfg.validate()
        return cfg

    def validate(self):
        keying.SecretKey(b"\0" * 32, self.L, self.M_prime)
        self.params()
        QuadratureSpec(self.quad_tolerance)
        if self.outlier_tolerance < 0:
            raise UsageError("outlier_tolerance must be nonnegative")

    def params(self):
        return auto_params(self.delta_coarse, self.delta_fine, self.kappa)


def _coerce(name, value):
    if name in ("delta_coarse", "delta_fine") and isinstance(value, str):
        return math.inf if value.strip().lower() in ("inf", "+inf", "infinity") else float(value)
    return value


# --- helpers -------------------------------------------------------------------


def output_file(path, cfg=None):
    """Resolve a relative output path against the config directory, then the env var."""
    p = Path(path)
    base = (cfg.output_path if cfg is not None else "") or os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def parse_bits(text):
    text = text.strip().replace(",", "").replace(" ", "")
    if not text or any(ch not in "01" for ch in text):
        raise UsageError(f"bit strings must contain only 0 and 1, got {text!r}")
    return np.array([int(ch) for ch in text], dtype=np.uint8)


def bits_str(bits):
    return "".join(str(int(b)) for b in bits)


def parse_code(text):
    """``none`` or ``repetition:r``."""
    if text is None or text == "none":
        return None
    kind, _, arg = text.partition(":")
    if kind != "repetition" or not arg:
        raise UsageError(f"--code must be 'none' or 'repetition:r', got {text!r}")
    try:
        return codes.RepetitionCode(int(arg))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def parse_count(text, L):
    """Sample counts like ``5120`` or ``10L``."""
    t = text.strip()
    if t.endswith("L"):
        return int(round(float(t[:-1] or 1) * L))
    return int(t)


def parse_floats(text):
    return [math.inf if v.strip() in ("inf", "+inf") else float(v) for v in text.split(",") if v.strip()]


def load_config(args):
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        return RunConfig.from_json(doc)
    return RunConfig()


def resolve_params(args, cfg):
    if getattr(args, "params", None):
        return params_from_spec(args.params, cfg.kappa)
    return cfg.params()


def _seed(args, cfg):
    return cfg.seed if args.seed is None else args.seed


# --- commands ------------------------------------------------------------------


def cmd_keygen(args, cfg):
    L = args.L if args.L is not None else cfg.L
    m = args.m_prime if args.m_prime is not None else cfg.M_prime
    key = keying.SecretKey.generate(L, m, seed=args.seed)
    carrier = keying.derive_carrier(key)
    key = dataclasses.replace(key, nonce=carrier.nonce)
    out = output_file(args.out, cfg)
    key.save(out)
    if args.export_u:
        carrier.to_csv(output_file(args.export_u, cfg))
    print(f"key {out} fingerprint {key.fingerprint()} L={L} m_prime={m} nonce={key.nonce}")


def cmd_embed(args, cfg):
    key = keying.SecretKey.load(args.key)
    carrier = keying.derive_carrier(key)
    params = resolve_params(args, cfg)
    code = parse_code(args.code)
    if args.message is not None:
        if code is None:
            raise UsageError("--message needs --code repetition:r")
        codeword = code.encode(parse_bits(args.message))
    elif args.codeword is not None:
        codeword = parse_bits(args.codeword)
    else:
        raise UsageError("give --codeword or --message")
    if codeword.size != key.M_prime:
        raise UsageError(f"codeword has {codeword.size} bits but the key carries m_prime={key.M_prime}")
    gen = RngStream(_seed(args, cfg), 1).generator()
    z_u = sample_watermark(params, codeword, gen, n=args.count)
    latents = keying.embed_latent(carrier, z_u, gen)
    out = output_file(args.out, cfg)
    fileio.write_latents(out, latents)
    print(f"wrote {args.count} latent(s) of dimension {key.L} to {out} with params {params.label()}")


def cmd_decode(args, cfg):
    key = keying.SecretKey.load(args.key)
    carrier = keying.derive_carrier(key)
    latents = fileio.read_latents(args.latent)
    if latents.shape[1] != key.L:
        raise UsageError(f"latent dimension {latents.shape[1]} does not match key L={key.L}")
    params = resolve_params(args, cfg)
    code = parse_code(args.code)
    reference = parse_bits(args.reference) if args.reference else None
    bits = keying.decode(carrier, latents, params.delta_coarse)
    for row in bits:
        line = f"codeword {bits_str(row)}"
        if code is not None:
            line += f"\nmessage {bits_str(code.decode(row))}"
        if reference is not None:
            ref_len = reference.size
            target = row if ref_len == row.size else (code.decode(row) if code else None)
            if target is None or target.size != ref_len:
                raise UsageError("reference length matches neither the codeword nor the message")
            line += f"\nbit_accuracy {np.mean(target == reference):.6f}"
        print(line)


def cmd_characteristic(args, cfg):
    params = resolve_params(args, cfg)
    quad = QuadratureSpec(cfg.quad_tolerance)
    gen = RngStream(_seed(args, cfg), 2).generator()
    rows = channel.characteristic_curve(params, parse_floats(args.sigma), args.n_mc, gen, quad)
    out = output_file(args.out, cfg)
    channel.write_curve_csv(out, rows)
    for row in rows:
        print(f"sigma {row[2]:g}  p_theory {row[3]:.6f}  capacity {row[6]:.6f}")
    print(f"wrote {out}")


def cmd_sweep(args, cfg):
    deltas = parse_floats(args.deltas) if args.deltas else None
    fractions = parse_floats(args.fractions) if args.fractions else None
    quad = QuadratureSpec(cfg.quad_tolerance)
    rows = characterize.sweep_surface(deltas, fractions, args.alpha, args.sigma, cfg.kappa, quad)
    out = output_file(args.out, cfg)
    grid_note = (
        f"grid: delta in {characterize.DEFAULT_DELTA_GRID[0]:g}..{characterize.DEFAULT_DELTA_GRID[-2]:g} plus inf, "
        f"fractions {list(characterize.DEFAULT_FINE_FRACTIONS)}"
        if deltas is None and fractions is None
        else "grid: user supplied"
    )
    characterize.write_surface_csv(out, rows, (f"alpha={args.alpha:g} sigma={args.sigma:g}", grid_note))
    if args.gnuplot:
        characterize.write_surface_gnuplot(output_file(args.gnuplot, cfg), rows)
    failed = sum(r.status != "ok" for r in rows)
    print(f"wrote {len(rows)} rows ({failed} failed cells) to {out}")


def cmd_attack(args, cfg):
    params = resolve_params(args, cfg)
    L = args.L if args.L is not None else cfg.L
    m = args.m_prime if args.m_prime is not None else cfg.M_prime
    N = parse_count(args.N, L)
    seed = _seed(args, cfg)
    rows = []
    report = None
    for trial in range(args.trials):
        gen = RngStream(seed, 100 + trial).generator()
        carrier = keying.derive_carrier(keying.SecretKey.generate(L, m, seed=seed * 1000 + trial))
        codeword = gen.integers(0, 2, size=m).astype(np.uint8)
        samples = security.watermarked_samples(carrier, params, codeword, N, gen)
        est = security.pca_attack(samples, cfg.outlier_tolerance, centered=not args.uncentered)
        report = est.report
        success = 0
        if est.m and args.spoof:
            success = security.spoof_trial(est, codeword, carrier, params, gen, samples=samples)
        rows.append(security.attack_row(report, m, params, float(success)))
        print(
            f"trial {trial}: outliers low {report.outliers_low} high {report.outliers_high}"
            f"  lambda [{report.eigenvalues[0]:.4f}, {report.eigenvalues[-1]:.4f}]"
            f"  mp [{report.mp_lower:.4f}, {report.mp_upper:.4f}]"
        )
    out = output_file(args.out, cfg)
    security.write_attack_csv(out, rows)
    if args.histogram and report is not None:
        security.write_histogram_csv(output_file(args.histogram, cfg), security.spectrum_histogram(report.eigenvalues))
    eta = security.params_security_ratio(params, m, L).eta
    print(f"eta {eta:.6g}  eta*L {eta * L:.6g}  N {N}  wrote {out}")


def cmd_validate(args, cfg):
    schemes = characterize.default_schemes(args.alpha, args.L if args.L is not None else cfg.L, cfg.kappa)
    sigmas = [s.strip() for s in args.sigmas.split(",") if s.strip()]
    gen = RngStream(_seed(args, cfg), 3).generator()
    quad = QuadratureSpec(cfg.quad_tolerance)
    rows = characterize.validate_system(schemes, sigmas, args.n_mc, gen, args.M, args.pe_target, quad)
    out = output_file(args.out, cfg)
    characterize.write_validation_csv(out, rows, (f"n_mc={args.n_mc} M={args.M} pe_target={args.pe_target:g}",))
    print(f"wrote {len(rows)} rows to {out}")


def cmd_scenario(args, cfg):
    params = resolve_params(args, cfg)
    if args.preset:
        sigma = channel.lookup_preset(args.preset).sigma
    else:
        sigma = args.sigma
    L = args.L if args.L is not None else cfg.L
    report = scenario.run_scenario(
        args.n_users,
        args.n_images,
        sigma,
        params,
        seed=_seed(args, cfg),
        L=L,
        M=args.M,
        margin=args.margin,
        inject_duplicates=args.inject_duplicates,
    )
    print(scenario.describe(report))
    if args.out:
        output_file(args.out, cfg).write_text(json.dumps(report.to_json(), indent=2) + "\n")


# --- parser --------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="ssblab", description="Nested-lattice seed watermarking laboratory.")
    parser.add_argument("--config", help="RunConfig JSON file")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=fn)
        p.add_argument("--seed", type=int, default=None)
        return p

    p = add("keygen", cmd_keygen, "create a key file")
    p.add_argument("--L", type=int)
    p.add_argument("--m-prime", type=int)
    p.add_argument("--out", default="key.json")
    p.add_argument("--export-u", help="also write the carrier matrix as CSV")

    p = add("embed", cmd_embed, "embed a codeword or encoded message into latent(s)")
    p.add_argument("--key", required=True)
    p.add_argument("--params", help="'D,d' with inf or auto allowed")
    p.add_argument("--codeword")
    p.add_argument("--message")
    p.add_argument("--code", default="none", help="none or repetition:r")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out", default="latent.bin")

    p = add("decode", cmd_decode, "decode latent file(s)")
    p.add_argument("--key", required=True)
    p.add_argument("--latent", required=True)
    p.add_argument("--params")
    p.add_argument("--code", default="none")
    p.add_argument("--reference", help="expected codeword or message bits")

    p = add("characteristic", cmd_characteristic, "flip probability and capacity versus sigma")
    p.add_argument("--params")
    p.add_argument("--sigma", default="0.21,0.42,1.0", help="comma separated sigmas")
    p.add_argument("--n-mc", type=int, default=0, help="Monte Carlo trials per sigma (0 to skip)")
    p.add_argument("--out", default="characteristic.csv")

    p = add("sweep", cmd_sweep, "capacity/fidelity/security surface")
    p.add_argument("--deltas")
    p.add_argument("--fractions")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--sigma", type=float, default=0.42)
    p.add_argument("--out", default="surface.csv")
    p.add_argument("--gnuplot")

    p = add("attack", cmd_attack, "spectral key-recovery attack")
    p.add_argument("--params")
    p.add_argument("--L", type=int)
    p.add_argument("--m-prime", type=int)
    p.add_argument("--N", default="10L", help="sample count, e.g. 5120 or 10L")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--uncentered", action="store_true")
    p.add_argument("--spoof", action="store_true", help="also run a spoofing trial with the estimate")
    p.add_argument("--out", default="attack.csv")
    p.add_argument("--histogram")

    p = add("validate", cmd_validate, "theory versus Monte Carlo for the standard schemes")
    p.add_argument("--sigmas", default="Sana/Identity,Sana/JPEG QF50,1.0", help="sigmas or Model/Transform presets")
    p.add_argument("--n-mc", type=int, default=10**5)
    p.add_argument("--M", type=int, default=32)
    p.add_argument("--pe-target", type=float, default=1e-6)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--L", type=int)
    p.add_argument("--out", default="validation.csv")

    p = add("scenario", cmd_scenario, "end-to-end attribution demo")
    p.add_argument("--n-users", type=int, default=100)
    p.add_argument("--n-images", type=int, default=1000)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--preset", help="take sigma = sqrt(variance) from a Model/Transform preset")
    p.add_argument("--params", default="1.6,auto")
    p.add_argument("--M", type=int, default=32)
    p.add_argument("--margin", type=float, default=0.8)
    p.add_argument("--L", type=int)
    p.add_argument("--inject-duplicates", type=int, default=0)
    p.add_argument("--out")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args)
        args.func(args, cfg)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, SSBError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
