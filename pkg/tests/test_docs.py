from pathlib import Path

from xicanon.verification import ANCHORS

README = Path(__file__).resolve().parents[1] / "README.md"


def test_every_anchor_is_indexed_in_readme():
    text = README.read_text(encoding="utf-8")
    missing = [a for a in ANCHORS.values() if f"`{a}`" not in text]
    assert not missing, f"anchors missing from README index: {missing}"


def test_every_subcommand_is_documented():
    text = README.read_text(encoding="utf-8")
    for cmd in ("theta", "kernel", "det", "mcurve", "evolve", "potentials", "zeros", "verify"):
        assert f"xicanon {cmd}" in text
