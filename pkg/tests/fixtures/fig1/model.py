class ModelWrapper:
    DefaultWindow = 96

    def __init__(self, model, n_seqs=16):
        self.model = model
        self.n_seqs = n_seqs

    def predict(self, data):
        """Predict per-chunk outputs for the whole dataset."""
        preds = {}
        for i, batch in enumerate(data.chunks):
            preds[i] = self.predict_on_batch(batch)
        return preds

    def predict_on_batch(self, batch):
        return self.model.run(batch)
