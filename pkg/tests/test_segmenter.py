import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planforge.mockdata import SyntheticCorpus
from planforge.segmenter import (
    SegmentedProgram,
    localize_fragments,
    render,
    segment,
    validate_syntax,
)

annotated_sources = st.text(
    alphabet=string.ascii_lowercase + " \t\n#\"'=()1",
    max_size=250,
)


def roundtrips(src: str) -> bool:
    return render(segment(src)) == src


def test_two_snippet_example():
    src = (
        "# Load the dataset\nimport d\ndata = d.load()\n"
        "# Compute summary\ns = data.sum()"
    )
    seg = segment(src)
    assert seg.preamble is None
    assert [(s.goal, s.code) for s in seg.snippets] == [
        ("Load the dataset", "import d\ndata = d.load()\n"),
        ("Compute summary", "s = data.sum()"),
    ]
    assert render(seg) == src


def test_comment_free_source_is_all_preamble():
    src = "a = 1\nb = 2\n"
    seg = segment(src)
    assert seg.snippets == []
    assert seg.preamble.code == src
    assert seg.preamble.goal == ""
    assert render(seg) == src


def test_consecutive_comment_lines_merge_goals():
    seg = segment("# a\n# b\nx=1")
    assert len(seg.snippets) == 1
    assert seg.snippets[0].goal == "a b"
    assert seg.snippets[0].code == "x=1"


def test_blank_between_comment_and_code_still_boundary():
    seg = segment("# setup\n\nx = 1\n")
    assert seg.preamble is None
    assert len(seg.snippets) == 1
    assert seg.snippets[0].code == "\nx = 1\n"


def test_trailing_comment_run_attaches_to_previous_snippet():
    src = "# work\nx = 1\n# dangling note\n"
    seg = segment(src)
    assert len(seg.snippets) == 1
    assert seg.snippets[0].code == "x = 1\n# dangling note\n"
    assert render(seg) == src


def test_marker_inside_string_not_a_boundary():
    src = 's = """\n# fake subgoal\n"""\nprint(s)\n'
    seg = segment(src)
    assert seg.snippets == []
    assert render(seg) == src


def test_empty_source():
    seg = segment("")
    assert seg.preamble is None and seg.snippets == []
    assert render(seg) == ""


def test_goal_comment_stored_separately_from_code():
    seg = segment("# compute\ny = f(x)")
    snip = seg.snippets[0]
    assert "#" not in snip.code
    assert snip.comment_text == "# compute\n"


def test_code_offsets_are_byte_accurate():
    src = "# café step\nvalue = 'café'\n"
    seg = segment(src)
    snip = seg.snippets[0]
    data = src.encode("utf-8")
    assert data[snip.code_start:snip.code_end].decode("utf-8") == snip.code


@settings(max_examples=400)
@given(annotated_sources)
def test_roundtrip_property(src):
    assert roundtrips(src)


@settings(max_examples=150)
@given(annotated_sources)
def test_segment_structure_invariants(src):
    seg = segment(src)
    if seg.preamble is not None:
        assert seg.preamble.goal == ""
        assert seg.preamble.comment_text == ""
    for snip in seg.snippets:
        assert snip.comment_text.lstrip().startswith("#")


def fifty_program_corpus() -> list[str]:
    corpus = SyntheticCorpus(40)
    sources = [annotated for _, _, annotated in corpus.entries]
    sources += [
        "x = 1\ny = 2\n",  # zero comments
        "# a\n# b\n# c\nwork()\n",  # consecutive comments
        "setup()\n\n\n# step\nrun()\n\n",  # trailing blanks
        "# only a comment run",  # comment-only program
        "",  # empty
        "# first\nalpha()\n\n\n# second\nbeta()\n# orphan trailing note\n",
        "if x:\n    # nested comment\n    y = 1\n",  # indented boundary
        'msg = """\n# inside string\n"""\n# real\nprint(msg)\n',
        "\n\n# after blanks\nz = 3",
        "shebang_like = 1\n# doc\nmain()\n",
    ]
    return sources


def test_fifty_program_roundtrip_sweep():
    sources = fifty_program_corpus()
    assert len(sources) == 50
    for src in sources:
        assert roundtrips(src), f"round-trip failed for {src!r}"


def test_validate_syntax():
    assert validate_syntax("x = 1")
    assert not validate_syntax("def f(:")
    assert not validate_syntax("x = (")
    assert validate_syntax("")


def test_validate_syntax_pure():
    src = "for i in range(3):\n    print(i)"
    assert validate_syntax(src) == validate_syntax(src)


def test_localize_first_occurrence():
    code = 'df = read("data.csv")'
    spans = localize_fragments(code, ['"data.csv"'])
    assert [(s.start, s.end) for s in spans] == [(10, 20)]
    assert code.encode()[10:20] == b'"data.csv"'


def test_localize_drops_missing_and_logs():
    discards = []
    spans = localize_fragments("x = 1", ["zzz"], discard_log=discards)
    assert spans == []
    assert discards == ["zzz"]


def test_localize_merges_overlaps():
    code = 'df = read("data.csv")'
    spans = localize_fragments(code, ["data", "data.csv"])
    assert len(spans) == 1
    assert spans[0].start == 11 and spans[0].end == 19


def test_localize_count_monotone():
    code = "alpha beta gamma"
    fragments = ["alpha", "beta", "missing", "gamma"]
    spans = localize_fragments(code, fragments)
    assert len(spans) <= len(fragments)


def test_localize_multibyte_offsets():
    code = 'name = "café"\n'
    spans = localize_fragments(code, ['"café"'])
    assert len(spans) == 1
    frag = code.encode("utf-8")[spans[0].start:spans[0].end]
    assert frag.decode("utf-8") == '"café"'


def test_render_rejects_nothing_but_reconstructs(populated):
    store = populated["store"]
    domain = populated["domain"]
    for program in store.list_programs(domain.id):
        if not program.annotated_source:
            continue
        seg = segment(program.annotated_source)
        assert render(seg) == program.annotated_source


def test_segmented_program_type():
    seg = segment("# g\nx=1")
    assert isinstance(seg, SegmentedProgram)
    assert seg.program_id is None
