"""
Tests for the diagnostic scripts.
"""

import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from scripts.check_graph_profile import check_graph_profile
from scripts.check_quantizer import check_quantizer


def test_graph_profile_script(capsys):
    assert check_graph_profile("g2")
    out = capsys.readouterr().out
    assert "Nodes: 10" in out
    assert "[OK] Profile estimated" in out


def test_graph_profile_script_degenerate(capsys):
    assert check_graph_profile("complete:3")
    assert "[!]" in capsys.readouterr().out


def test_graph_profile_script_bad_preset(capsys):
    assert not check_graph_profile("ring:0")
    assert "[X]" in capsys.readouterr().out


def test_quantizer_script(capsys):
    assert check_quantizer("levels:16", 8, 20_000)
    assert "[X]" not in capsys.readouterr().out
