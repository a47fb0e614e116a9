import json
import re
from pathlib import Path

from dmcis.level_two import RADIO_STANDARDS
from dmcis.scenario import DEFAULTS, REQUIRED

DOCS = Path(__file__).resolve().parent.parent / "docs"


def parse_tables(text):
    tables, section = {}, None
    for line in text.splitlines():
        if line.startswith("## "):
            section = line[3:].strip()
            continue
        m = re.match(r"^\| (\S+) \| (.+) \|$", line)
        if section and m and m.group(1) != "key" and not line.startswith("|---"):
            tables.setdefault(section, {})[m.group(1)] = m.group(2)
    return tables


def test_defaults_doc_matches_code():
    tables = parse_tables((DOCS / "defaults.md").read_text())
    tables.pop("Model constants", None)
    assert set(tables) == set(DEFAULTS)
    for section, keys in DEFAULTS.items():
        assert set(tables[section]) == set(keys), section
        for key, default in keys.items():
            cell = tables[section][key]
            if default is REQUIRED:
                assert cell == "required", (section, key)
            else:
                assert json.loads(cell.strip("`")) == default, (section, key)


def test_radio_constants_documented():
    text = (DOCS / "defaults.md").read_text()
    for std, (rate, channels, rng) in RADIO_STANDARDS.items():
        assert f"| radio {std} | {rate:g} Mbps nominal, {channels} channels, {rng:g} m |" in text
