import csv
import json
import math

import numpy as np
import pytest

from ssblab.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, RunConfig, UsageError, main, parse_count
from ssblab.fileio import MAGIC, read_latents, write_latents
from ssblab.keying import SecretKey, derive_carrier, project_to_watermark


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def keygen(capsys, path, L, m, seed):
    code, out, _ = run(capsys, "keygen", "--L", L, "--m-prime", m, "--seed", seed, "--out", path)
    assert code == EXIT_OK
    return path


def rows(path):
    with open(path) as fh:
        return list(csv.reader(ln for ln in fh if not ln.startswith("#")))


def test_keygen_deterministic_and_orthonormal(tmp_path, capsys):
    a = keygen(capsys, tmp_path / "a.json", 4096, 2048, 7)
    b = keygen(capsys, tmp_path / "b.json", 4096, 2048, 7)
    assert a.read_bytes() == b.read_bytes()
    U = derive_carrier(SecretKey.load(a)).U
    assert np.allclose(U.T @ U, np.eye(2048), atol=1e-9)


def test_keygen_prints_fingerprint_and_exports(tmp_path, capsys):
    code, out, _ = run(capsys, "keygen", "--L", 16, "--m-prime", 4, "--seed", 1, "--out", tmp_path / "k.json", "--export-u", tmp_path / "U.csv")
    assert code == EXIT_OK
    assert SecretKey.load(tmp_path / "k.json").fingerprint() in out
    assert np.loadtxt(tmp_path / "U.csv", delimiter=",").shape == (16, 4)


def test_keygen_bad_dims(tmp_path, capsys):
    code, _, err = run(capsys, "keygen", "--L", 4, "--m-prime", 8, "--out", tmp_path / "k.json")
    assert code == EXIT_USAGE and "exceeds" in err


def test_argparse_errors_map_to_usage(capsys):
    assert run(capsys)[0] == EXIT_USAGE
    assert run(capsys, "keygen", "--L", "x")[0] == EXIT_USAGE
    assert run(capsys, "--help")[0] == EXIT_OK


def test_embed_decode_roundtrip(tmp_path, capsys):
    key = keygen(capsys, tmp_path / "k.json", 64, 16, 3)
    cw = "1011001110001111"
    lat = tmp_path / "z.bin"
    for params in ("inf,inf", "1.6,0.4", "1.6,auto"):
        code, *_ = run(capsys, "embed", "--key", key, "--params", params, "--codeword", cw, "--seed", 5, "--out", lat)
        assert code == EXIT_OK
        code, out, _ = run(capsys, "decode", "--key", key, "--params", params, "--latent", lat, "--reference", cw)
        assert code == EXIT_OK
        assert f"codeword {cw}" in out and "bit_accuracy 1.000000" in out


def test_embed_is_reproducible(tmp_path, capsys):
    key = keygen(capsys, tmp_path / "k.json", 32, 8, 3)
    for name in ("a.bin", "b.bin"):
        run(capsys, "embed", "--key", key, "--codeword", "10101010", "--seed", 9, "--count", 3, "--out", tmp_path / name)
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_repetition_message_roundtrip(tmp_path, capsys):
    key = keygen(capsys, tmp_path / "k.json", 64, 12, 4)
    lat = tmp_path / "z.bin"
    code, *_ = run(capsys, "embed", "--key", key, "--message", "1001", "--code", "repetition:3", "--out", lat)
    assert code == EXIT_OK
    code, out, _ = run(capsys, "decode", "--key", key, "--latent", lat, "--code", "repetition:3", "--reference", "1001")
    assert "codeword 111000000111" in out and "message 1001" in out and "bit_accuracy 1.000000" in out


def test_repetition_corrects_one_flip_per_block(tmp_path, capsys):
    key = keygen(capsys, tmp_path / "k.json", 64, 12, 4)
    lat = tmp_path / "z.bin"
    corrupted = "110010001011"  # 1001 encoded as 111 000 000 111, one flip per block
    run(capsys, "embed", "--key", key, "--codeword", corrupted, "--out", lat)
    code, out, _ = run(capsys, "decode", "--key", key, "--latent", lat, "--code", "repetition:3", "--reference", "1001")
    assert code == EXIT_OK and "message 1001" in out and "bit_accuracy 1.000000" in out


def test_wrong_key_is_a_coin_flip(tmp_path, capsys):
    right = keygen(capsys, tmp_path / "r.json", 512, 256, 1)
    wrong = keygen(capsys, tmp_path / "w.json", 512, 256, 2)
    cw = "".join(np.random.default_rng(0).integers(0, 2, size=256).astype(str))
    lat = tmp_path / "z.bin"
    run(capsys, "embed", "--key", right, "--params", "1.6,auto", "--codeword", cw, "--count", 8, "--out", lat)
    code, out, _ = run(capsys, "decode", "--key", wrong, "--params", "1.6,auto", "--latent", lat, "--reference", cw)
    acc = [float(ln.split()[1]) for ln in out.splitlines() if ln.startswith("bit_accuracy")]
    assert len(acc) == 8
    assert abs(np.mean(acc) - 0.5) <= 4 * math.sqrt(0.25 / (8 * 256))


def test_embed_sign_params_give_half_normal(tmp_path, capsys):
    key = keygen(capsys, tmp_path / "k.json", 64, 32, 8)
    lat = tmp_path / "z.bin"
    run(capsys, "embed", "--key", key, "--params", "inf,inf", "--codeword", "1" * 32, "--count", 2000, "--out", lat)
    y = project_to_watermark(derive_carrier(SecretKey.load(key)), read_latents(lat))
    assert np.all(y > 0)
    assert abs(y.mean() - math.sqrt(2 / math.pi)) <= 4 * math.sqrt((1 - 2 / math.pi) / y.size)


def test_embed_decode_errors(tmp_path, capsys):
    key = keygen(capsys, tmp_path / "k.json", 16, 4, 0)
    assert run(capsys, "embed", "--key", key, "--codeword", "101", "--out", tmp_path / "z.bin")[0] == EXIT_USAGE
    assert run(capsys, "embed", "--key", key, "--codeword", "10a1", "--out", tmp_path / "z.bin")[0] == EXIT_USAGE
    assert run(capsys, "embed", "--key", key, "--message", "1", "--out", tmp_path / "z.bin")[0] == EXIT_USAGE
    assert run(capsys, "embed", "--key", key, "--message", "1", "--code", "repetition:2")[0] == EXIT_USAGE
    assert run(capsys, "embed", "--key", tmp_path / "missing.json", "--codeword", "1010")[0] == EXIT_USAGE
    big = tmp_path / "big.bin"
    write_latents(big, np.zeros((1, 17)))
    code, _, err = run(capsys, "decode", "--key", key, "--latent", big)
    assert code == EXIT_USAGE and "dimension" in err


def test_latent_file_format(tmp_path):
    z = np.arange(6.0).reshape(2, 3)
    path = tmp_path / "z.bin"
    write_latents(path, z)
    raw = path.read_bytes()
    assert raw[:8] == MAGIC
    assert int.from_bytes(raw[8:16], "little") == 2 and int.from_bytes(raw[16:24], "little") == 3
    assert len(raw) == 24 + 6 * 8
    assert np.array_equal(read_latents(path), z)
    path.write_bytes(raw[:-1])
    with pytest.raises(ValueError):
        read_latents(path)
    path.write_bytes(b"NOTMAGIC" + raw[8:])
    with pytest.raises(ValueError):
        read_latents(path)


def test_characteristic_command(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, text, _ = run(capsys, "characteristic", "--params", "inf,inf", "--sigma", "1.0", "--n-mc", 10000, "--out", out)
    assert code == EXIT_OK
    data = rows(out)
    assert data[0] == ["delta", "delta_fine", "sigma", "p_theory", "p_mc", "stderr", "capacity"]
    assert float(data[1][3]) == pytest.approx(0.25, abs=1e-6)
    assert abs(float(data[1][4]) - 0.25) <= 4 * float(data[1][5])


def test_sweep_command(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, text, _ = run(capsys, "sweep", "--out", out, "--gnuplot", tmp_path / "s.dat")
    assert code == EXIT_OK
    assert len(rows(out)) - 1 == 21 * 5
    assert "105 rows" in text
    small = tmp_path / "small.csv"
    run(capsys, "sweep", "--deltas", "0.8,1.6,inf", "--fractions", "0,1", "--out", small)
    assert len(rows(small)) - 1 == 6


def test_attack_command_perfect_security(tmp_path, capsys):
    out = tmp_path / "a.csv"
    code, text, _ = run(capsys, "attack", "--params", "1.6,auto", "--L", 128, "--m-prime", 64, "--N", "10L", "--seed", 1, "--out", out, "--histogram", tmp_path / "h.csv")
    assert code == EXIT_OK
    data = rows(out)
    assert data[0][0] == "N" and int(data[1][0]) == 1280
    assert data[1][9] == "0" and data[1][10] == "0"
    assert rows(tmp_path / "h.csv")[0] == ["bin_lo", "bin_hi", "count"]


def test_attack_command_sign_case_finds_cluster(tmp_path, capsys):
    out = tmp_path / "a.csv"
    run(capsys, "attack", "--params", "inf,inf", "--L", 128, "--m-prime", 64, "--seed", 2, "--out", out)
    assert int(rows(out)[1][9]) >= 0.85 * 64


def test_validate_command(tmp_path, capsys):
    out = tmp_path / "v.csv"
    code, *_ = run(capsys, "validate", "--sigmas", "Sana/Identity,1.0", "--n-mc", 10000, "--out", out)
    assert code == EXIT_OK
    assert (tmp_path / "v.csv").read_text().startswith("# AWGN analog")
    data = rows(out)
    assert len(data) - 1 == 10
    assert any(r[1] == "Sana/Identity" for r in data[1:])


def test_scenario_command(tmp_path, capsys):
    out = tmp_path / "s.json"
    code, text, _ = run(capsys, "scenario", "--n-users", 20, "--n-images", 50, "--sigma", 0, "--L", 128, "--inject-duplicates", 2, "--out", out)
    assert code == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["version"] == 1 and doc["attribution_accuracy"] == 1.0 and doc["audit_flagged"]
    assert "attribution 50/50" in text
    code, _, err = run(capsys, "scenario", "--n-users", 5, "--M", 2)
    assert code == EXIT_USAGE


def test_config_file(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"L": 32, "M_prime": 8, "delta_coarse": "inf", "seed": 4, "output_path": str(tmp_path / "o")}))
    code, *_ = run(capsys, "--config", cfg, "keygen", "--out", "k.json")
    assert code == EXIT_OK
    key = SecretKey.load(tmp_path / "o" / "k.json")
    assert (key.L, key.M_prime) == (32, 8)
    cfg.write_text(json.dumps({"L": 32, "colour": "blue"}))
    code, _, err = run(capsys, "--config", cfg, "keygen")
    assert code == EXIT_USAGE and "colour" in err
    with pytest.raises(UsageError):
        RunConfig.from_json({"bogus": 1})


def test_output_dir_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SSBLAB_OUTPUT_DIR", str(tmp_path / "env"))
    code, *_ = run(capsys, "keygen", "--L", 8, "--m-prime", 2, "--seed", 1, "--out", "k.json")
    assert code == EXIT_OK
    assert (tmp_path / "env" / "k.json").exists()


def test_convergence_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"quad_tolerance": 1e-300}))
    code, _, err = run(capsys, "--config", cfg, "characteristic", "--params", "1.6,0.8", "--sigma", "0.42", "--out", tmp_path / "c.csv")
    assert code == EXIT_NUMERIC


def test_parse_count():
    assert parse_count("10L", 512) == 5120
    assert parse_count("0.5L", 10) == 5
    assert parse_count("300", 512) == 300
