from data import chunk_srcs


def eval_on_dataset(model, srcs, window_size):
    window = window_size or model.DefaultWindow
    dataset = chunk_srcs(srcs, window)
    preds = model.predict(dataset)
    return preds
