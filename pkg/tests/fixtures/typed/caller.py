from typedlib import fetch_rows, summarize


def report(limit: int = 5) -> str:
    rows = fetch_rows(limit)
    return summarize(rows)
