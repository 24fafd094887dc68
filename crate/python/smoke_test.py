"""Smoke test for the designscan extension module.

Build and run:
    cargo build --release -p designscan-py --features extension-module
    cp target/release/libdesignscan.so python/designscan.so
    python3 python/smoke_test.py
"""

import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import designscan as ds

WEBMAIL = {
    "attacker": "No Access",
    "source": "External",
    "target": "Buffer",
    "vector": "Long Get Request",
    "type": "Availability",
    "input_validation": "Partial Validation",
    "dependencies": "Authentication & Input Validation",
    "output_encoding": "None",
    "authentication": "None",
    "access_control": "URL Access",
    "http_security": "Input Validation",
    "error_handling": "None",
}


def main():
    assert ds.tansig(0.0) == 0.0
    assert abs(ds.tansig(1.0) - 0.7615941559557649) < 1e-12
    assert ds.decode_prediction(50.6745, 29, 53) == 51
    assert ds.build_partitions(list(range(1, 54))) == [(1, 28), (29, 53)]

    pinned = ds.Vocabulary.pinned()
    assert pinned.encode(WEBMAIL) == [0, 1, 9, 39, 5, 2, 6, 0, 0, 2, 3, 0]
    assert pinned.code_of("vector", "long get request") == 39

    corpus, vocab = ds.synthetic_corpus(42)
    assert len(corpus) == 306
    train, test = corpus.split()
    model = ds.EnsembleModel.train(train, vocab, seed=42)
    assert model.partitions() == [(1, 28), (29, 53)]
    accuracy, per_partition, report = model.evaluate(test, vocab)
    assert report.startswith("scenario_id,partition,expected,actual_raw,predicted,correct\n")
    print(f"test accuracy {accuracy:.4f} per partition {per_partition}")

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.ens")
        model.save(path)
        again = ds.EnsembleModel.load(path)
        assert again.to_text() == model.to_text()
        vocab.save(os.path.join(d, "vocab.txt"))
        assert ds.Vocabulary.load(os.path.join(d, "vocab.txt")).fingerprint() == vocab.fingerprint()

    pattern, raw, partition = model.predict_codes(list(train.records()[0][1]), vocab)
    lo, hi = model.partitions()[partition]
    assert lo <= pattern <= hi
    try:
        model.predict(WEBMAIL, pinned)
    except ValueError as e:
        assert "fingerprint" in str(e)
    else:
        raise AssertionError("fingerprint mismatch not reported")
    print("ok")


if __name__ == "__main__":
    main()
