class ChunkedDataset:
    """A dataset of equally sized source chunks."""


def chunk_srcs(srcs, window):
    # Split sources into windows of equal size.
    step = max(1, window)
    return [srcs[i : i + step] for i in range(0, len(srcs), step)]
