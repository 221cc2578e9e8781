"""Acceptance: the stub passes the shipped conformance vectors end to end."""

from qe_stub_adapter import conformance_selftest


def test_stub_passes_shipped_vectors():
    name = "stub_conformance"
    checks = conformance_selftest()
    try:
        assert [c.name for c in checks] == ["utf8_id_echo", "id_bijection",
                                            "ordering_freedom", "error_line"]
        assert all(c.passed for c in checks), [
            (c.name, c.detail) for c in checks if not c.passed]
    except BaseException:
        print(f"FAIL {name}")
        raise
    print(f"PASS {name}")
