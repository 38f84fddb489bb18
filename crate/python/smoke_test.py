"""Smoke test for the lwelab extension module.

Build and install first:  maturin develop -m crates/py/Cargo.toml --release
"""

import lwelab


def main() -> None:
    params = lwelab.CryptoParams(32, eps=0.1)
    sk, pk = lwelab.keygen(params, seed=1)
    bits = [1, 0, 1, 1, 0, 0, 1, 0]
    cts = lwelab.encrypt(pk, bits, seed=2)
    assert lwelab.decrypt(sk, cts) == bits
    pk2 = lwelab.PublicKey.from_json(pk.to_json())
    assert lwelab.decrypt(sk, lwelab.encrypt(pk2, bits, seed=3)) == bits

    shared = lwelab.CryptoParams(16, shared=True)
    sk_s, pk_s = lwelab.keygen(shared, seed=4, crs_seed=99)
    assert '"crs_seed"' in pk_s.to_json()
    assert lwelab.decrypt(sk_s, lwelab.encrypt(pk_s, [1, 0], seed=5)) == [1, 0]

    secret, rows = lwelab.sample_lwe_discrete(3, 11, 0.02, 60, seed=6)
    assert lwelab.ml_solve(3, 11, 0.02, rows) == secret

    lat = lwelab.Lattice([[1.0, 0.0], [7.0, 1.0]])
    assert abs(lat.det - 1.0) < 1e-9
    reduced = lat.lll()
    assert max(abs(x) for c in reduced.columns for x in c) <= 1.0
    cv = lat.closest_vector([2.2, -0.9])
    assert cv.vector == [2.0, -1.0]
    assert lat.babai([2.2, -0.9]).vector == [2.0, -1.0]
    pts = lat.sample_gaussian(3.0, 200, seed=7)
    assert len(pts) == 200 and all(float(x).is_integer() for v in pts for x in v)
    assert lwelab.Lattice([[1.0, 0.0], [0.0, 1.0]]).successive_minima() == (1.0, 1.0)

    report = lwelab.run_checks(["banaszczyk", "shift-invariance"], seed=7)
    assert [r["check_id"] for r in report] == ["banaszczyk", "shift-invariance"]
    assert all(r["pass"] for r in report)

    try:
        lwelab.CryptoParams(2)
    except ValueError:
        pass
    else:
        raise AssertionError("n = 2 should be rejected")

    print("smoke test passed")


if __name__ == "__main__":
    main()
