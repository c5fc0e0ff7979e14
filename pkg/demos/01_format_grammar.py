"""Walk through the output-format grammar and check its two structural claims.

Run:  python3 demos/01_format_grammar.py
"""

from shortcutlab.formats import EXCLUSIVE, NESTED, FormatId, extract_boxed, matched_formats, parse
from shortcutlab.verify import verify_exclusivity, verify_nesting

SAMPLES = [
    "<think> 1 2 </think> <answer> \\boxed{ 3 } </answer>",
    "<answer> \\boxed{ 3 } </answer>",
    "_ _ \\boxed{ 3 }",
    "<answer> 3 </answer>",
    "<think> _ </think> <answer> </answer> <think> </think> <answer> \\boxed{ 7 } </answer>",
]


def show(text: str) -> None:
    seq = parse(text)
    nested = sorted(f.value for f in matched_formats(seq, NESTED))
    excl = sorted(f.value for f in matched_formats(seq, EXCLUSIVE))
    other = sorted(f.value for f in matched_formats(seq, (FormatId.STRICT, FormatId.COMPOSITE)))
    print(f"{text}\n    nested={nested} exclusive={excl} run-level={other} boxed={extract_boxed(seq)!r}")


if __name__ == "__main__":
    print("-- which formats each completion satisfies --")
    for text in SAMPLES:
        show(text)

    # Every sequence up to length 8 is checked exhaustively; longer ones are
    # sampled.  A small sample count keeps this demo quick.
    print("\n-- bounded proofs --")
    for check in (verify_nesting, verify_exclusivity):
        print(check(12, n_samples=200_000).to_text())
