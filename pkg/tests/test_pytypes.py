import random

import pytest

from helpers import oracle_normalize, permute_unions, random_type
from typeweaver.pytypes import (
    ConstructorFrequencyTable,
    PyType,
    TypeParseError,
    adjust_for_comparison,
    base_head,
    categorize,
    normalize,
    parse_type,
    render_source,
)


def t(text):
    return parse_type(text)


class TestParse:
    def test_parametric_tree_and_size(self):
        ty = t("dict[str, foo.Bar]")
        assert ty.head == "dict"
        assert [a.head for a in ty.args] == ["str", "foo.Bar"]
        assert ty.size() == 3

    def test_scalar_size(self):
        assert t("int").size() == 1
        assert t("foo.Bar").size() == 1

    def test_forward_reference_unwraps(self):
        assert t('"ChunkedDataset"') == PyType("ChunkedDataset")

    def test_whitespace_accepted_rendering_canonical(self):
        assert t("Dict[ str ,  List ]").render() == "Dict[str,List]"

    def test_invalid_syntax_carries_position(self):
        with pytest.raises(TypeParseError) as exc:
            t("dict[")
        assert exc.value.offset is not None

    def test_empty_rejected(self):
        with pytest.raises(TypeParseError):
            t("   ")

    def test_pep_604_accepted(self):
        assert normalize(t("int | None")) == normalize(t("Optional[int]"))

    def test_callable_list_group(self):
        ty = t("Callable[[int, str], bool]")
        assert ty.render() == "Callable[[int,str],bool]"
        # Argument lists count each member type, not the bracket group.
        assert ty.size() == 4

    def test_ellipsis(self):
        assert t("Callable[..., int]").render() == "Callable[...,int]"

    def test_none_literal(self):
        assert t("None") == PyType("None")


class TestNormalize:
    def test_union_flatten_and_sort(self):
        assert normalize(t("Union[B,Union[C,A]]")).render() == "Union[A,B,C]"

    def test_list_any_dropped(self):
        assert normalize(t("List[Any]")).render() == "List"

    def test_optional_to_union(self):
        assert normalize(t("Optional[int]")).render() == "Union[int,None]"

    def test_all_any_drop_and_capitalization_agree(self):
        # Hand-derived: rule 3 drops Dict[Any,Any] to Dict; rule 4 lifts dict
        # to Dict; the two must agree.
        assert normalize(t("Dict[Any, Any]")) == normalize(t("dict"))
        assert normalize(t("dict")).render() == "Dict"

    def test_partial_any_kept(self):
        # The all-Any rule applies only when every argument is Any.
        assert normalize(t("Dict[str, Any]")).render() == "Dict[str,Any]"

    def test_typing_prefix_stripped(self):
        assert normalize(t("typing.Optional[int]")) == normalize(t("Optional[int]"))
        assert normalize(t("typing.List[int]")) == normalize(t("List[int]"))

    def test_equivalence_class(self):
        forms = ["Optional[int]", "Union[int,None]", "Union[None,int]"]
        normalized = {normalize(t(f)).render() for f in forms}
        assert normalized == {"Union[int,None]"}

    def test_idempotent_on_examples(self):
        for text in ["Optional[List[Any]]", "Union[B,Union[C,A]]", "dict[str, list]"]:
            once = normalize(t(text))
            assert normalize(once) == once


class TestAdjust:
    def test_qualified_to_simple(self):
        assert adjust_for_comparison(t("torch.Tensor")).render() == "Tensor"

    def test_outer_optional_unwrapped(self):
        assert adjust_for_comparison(t("Union[int,None]")).render() == "int"
        assert adjust_for_comparison(t("Optional[int]")).render() == "int"

    def test_qualification_applies_recursively(self):
        # Hand-derived from the recursive simple-name rule.
        assert adjust_for_comparison(t("Dict[str, m.T]")).render() == "Dict[str,T]"

    def test_final_unwrapped(self):
        assert adjust_for_comparison(t("Final[int]")).render() == "int"

    def test_inner_optional_kept(self):
        assert (
            adjust_for_comparison(t("Dict[str, Optional[int]]")).render()
            == "Dict[str,Union[int,None]]"
        )

    def test_idempotent(self):
        rng = random.Random(7)
        for _ in range(300):
            ty = random_type(rng)
            once = adjust_for_comparison(ty)
            assert adjust_for_comparison(once) == once


class TestBaseHead:
    def test_outermost_only(self):
        assert base_head(adjust_for_comparison(t("Dict[str, List]"))) == "Dict"
        assert base_head(adjust_for_comparison(t("Mapping[str, List]"))) == "Mapping"

    def test_scalar(self):
        assert base_head(adjust_for_comparison(t("int"))) == "int"

    def test_union_head(self):
        # By definition of the outermost constructor.
        assert base_head(adjust_for_comparison(t("Union[A,B]"))) == "Union"


class TestCategorize:
    def freq(self):
        common = [t("int"), t("str"), t("dict"), t("list"), t("None")]
        return ConstructorFrequencyTable.from_types(common * 3, top_k=100)

    def test_simple_common(self):
        assert categorize(normalize(t("int")), self.freq()) == ("simple", "common")

    def test_complex_rare(self):
        ty = normalize(t("dict[int, list[PythonType]]"))
        assert categorize(ty, self.freq()) == ("complex", "rare")

    def test_simple_rare(self):
        # Size 1 by the constructor-count rule; rare by table lookup.
        assert categorize(normalize(t("foo.Bar")), self.freq()) == ("simple", "rare")

    def test_top_k_cutoff_deterministic(self):
        counts = {f"c{i}": 1 for i in range(150)}
        table = ConstructorFrequencyTable(counts=counts, top_k=100)
        top = table.top_set()
        assert len(top) == 100
        assert top == frozenset(sorted(counts)[:100])  # name-ordered tie break


class TestRenderSource:
    def test_builtins_lowercased_for_insertion(self):
        assert render_source(normalize(t("dict[int, list[PythonType]]"))) == (
            "dict[int,list[PythonType]]"
        )

    def test_non_builtins_untouched(self):
        assert render_source(normalize(t("Union[int,None]"))) == "Union[int,None]"


class TestOracleAgreement:
    def test_matches_bruteforce_normalizer(self):
        rng = random.Random(1234)
        for _ in range(2000):
            ty = random_type(rng)
            assert normalize(ty) == oracle_normalize(ty), ty.render()

    def test_idempotent_and_permutation_invariant(self):
        rng = random.Random(99)
        for _ in range(1000):
            ty = random_type(rng)
            n = normalize(ty)
            assert normalize(n) == n
            assert normalize(permute_unions(rng, ty)) == n

    def test_size_never_grows_under_normalization(self):
        rng = random.Random(5)
        for _ in range(500):
            ty = random_type(rng)
            assert normalize(ty).size() <= ty.size()
