import json

import pytest

from colliderlab.exceptions import TemplateSlotUnresolved
from colliderlab.prompts import (ALL_CODES, CANONICAL, BUILTIN_DOMAINS, QUESTION, CounterbalanceCode,
                                 DomainVocabulary, builtin_vocabularies, load_vocabulary, phrase,
                                 prompt_matrix, read_bundles, render_prompt, write_bundles)
from colliderlab.tasks import catalog, get_task

SOCIOLOGY = load_vocabulary("sociology")


def test_golden_prompt(fixtures_dir):
    text = render_prompt(SOCIOLOGY, CANONICAL, get_task("X")).full_text
    assert text == (fixtures_dir / "golden_sociology_cb1_X.txt").read_text(encoding="utf-8")


def test_sections_and_suffix():
    bundle = render_prompt(SOCIOLOGY, CANONICAL, get_task("VI"))
    assert [name for name, _ in bundle.sections] == ["introduction", "variables", "mechanism", "observation",
                                                      "question"]
    assert bundle.full_text == "\n".join(text for _, text in bundle.sections)
    assert bundle.full_text.endswith("Please provide only a numeric response and no additional information.")
    assert bundle.query == "p(C1=1 | C2=1, E=1)"


def test_observation_lists_evidence_only():
    obs = render_prompt(SOCIOLOGY, CANONICAL, get_task("I")).section_map["observation"]
    assert obs.endswith("normal urbanization, normal interest in religion.")
    obs = render_prompt(SOCIOLOGY, CANONICAL, get_task("VII")).section_map["observation"]
    assert obs.endswith("exhibits the following: high socio-economic mobility.")


@pytest.mark.parametrize("domain", BUILTIN_DOMAINS)
@pytest.mark.parametrize("code", [1, 2, 3, 4])
def test_coverage(domain, code):
    vocab = load_vocabulary(domain)
    cb = CounterbalanceCode(code)
    for task in catalog():
        sections = render_prompt(vocab, cb, task).section_map
        for var, value in task.query.evidence:
            assert phrase(vocab, cb, var, value) in sections["observation"]
        assert phrase(vocab, cb, task.query.query_var, 1) in sections["question"]
        assert vocab.introduction in render_prompt(vocab, cb, task).full_text


def test_flip_changes_only_the_causes_adjective():
    base = render_prompt(SOCIOLOGY, CounterbalanceCode(1), get_task("II")).section_map
    flipped = render_prompt(SOCIOLOGY, CounterbalanceCode(3), get_task("II")).section_map
    assert base["variables"] == flipped["variables"] and base["introduction"] == flipped["introduction"]
    assert "High urbanization causes" in base["mechanism"]
    assert "Low urbanization causes" in flipped["mechanism"]
    assert base["mechanism"].split(". Also")[1] == flipped["mechanism"].split(". Also")[1]


def test_counterbalance_completeness():
    for var in ("C1", "C2"):
        flips = [cb.flipped(var) for cb in ALL_CODES]
        assert flips.count(True) == 2 and flips.count(False) == 2
    assert len({(cb.flip_c1, cb.flip_c2) for cb in ALL_CODES}) == 4
    with pytest.raises(ValueError):
        CounterbalanceCode(5)


def test_matrix():
    bundles = prompt_matrix(builtin_vocabularies(), catalog())
    assert len(bundles) == 132
    single = prompt_matrix([SOCIOLOGY], catalog(), [1])
    assert [b.task_id for b in single] == [t.id for t in catalog()]
    assert prompt_matrix([SOCIOLOGY], catalog()) == prompt_matrix([SOCIOLOGY], catalog())
    with pytest.raises(ValueError):
        prompt_matrix([], catalog())


def test_reconstructed_vocabularies_are_flagged():
    flags = {v.domain: v.reconstructed for v in builtin_vocabularies()}
    assert flags == {"economy": True, "sociology": False, "weather": True}


def test_bundle_round_trip(tmp_path):
    bundles = prompt_matrix([load_vocabulary("weather")], catalog()[:3], [1, 4])
    write_bundles(bundles, tmp_path / "p.jsonl")
    assert read_bundles(tmp_path / "p.jsonl") == bundles


def test_vocabulary_file_round_trip(tmp_path):
    path = tmp_path / "v.json"
    path.write_text(json.dumps(SOCIOLOGY.to_dict()), encoding="utf-8")
    assert load_vocabulary(path) == SOCIOLOGY
    assert load_vocabulary(path).fingerprint() == SOCIOLOGY.fingerprint()


def test_invalid_vocabularies():
    data = SOCIOLOGY.to_dict()
    del data["variables"]["E"]
    with pytest.raises(ValueError):
        DomainVocabulary.from_dict(data)
    data = SOCIOLOGY.to_dict()
    data["variables"]["C1"]["active"] = "medium"
    with pytest.raises(ValueError):
        DomainVocabulary.from_dict(data)


def test_unresolved_slot():
    data = SOCIOLOGY.to_dict()
    data["unit_singular"] = None
    with pytest.raises(TemplateSlotUnresolved):
        render_prompt(DomainVocabulary.from_dict(data), CANONICAL, get_task("VII"))
    assert "{query}" in QUESTION
