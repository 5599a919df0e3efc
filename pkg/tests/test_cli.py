import json

import pytest

from dcst.cli import main
from dcst.conllu import parse_conllu, read_conllu, save_conllu
from dcst.synth import generate_corpus

TINY = ["--set", "word_dim=8", "--set", "char_dim=4", "--set", "char_filters=4", "--set", "pos_dim=4",
        "--set", "hidden=6", "--set", "layers=1", "--set", "arc_mlp=6", "--set", "label_mlp=5",
        "--set", "tagger_fc1=6", "--set", "tagger_fc2=5", "--set", "epochs=1"]


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    c = generate_corpus(60, 5)
    save_conllu(d / "L.conllu", c[:15])
    save_conllu(d / "dev.conllu", c[15:25])
    save_conllu(d / "U.conllu", c[25:])
    return d


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main(["parse", "--model", "x"])
    assert e.value.code == 1
    assert main(["encode-tags", "--scheme", "zz", "--input", "x"]) == 1


def test_evaluate_identity(data, capsys):
    assert main(["evaluate", "--gold", str(data / "dev.conllu"), "--pred", str(data / "dev.conllu")]) == 0
    out = capsys.readouterr().out
    assert "UAS            1.000" in out and "LAS            1.000" in out


def test_data_error_reports_file_and_line(tmp_path, capsys):
    bad = tmp_path / "bad.conllu"
    bad.write_text("1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n2\tb\tb\n\n")
    assert main(["evaluate", "--gold", str(bad), "--pred", str(bad)]) == 2
    assert f"{bad}:2:" in capsys.readouterr().err


def test_encode_tags_chain(tmp_path, capsys):
    chain = tmp_path / "chain.conllu"
    chain.write_text("".join(f"{i}\tw{i}\t_\tX\t_\t_\t{i - 1}\tdep\t_\t_\n" for i in range(1, 5)) + "\n")
    assert main(["encode-tags", "--scheme", "dr", "--input", str(chain)]) == 0
    assert [ln.split("\t")[1] for ln in capsys.readouterr().out.split("\n") if ln] == ["1", "2", "3", "4"]


def test_train_parse_evaluate(data, tmp_path):
    out = tmp_path / "base"
    assert main(["train-base", "--train", str(data / "L.conllu"), "--dev", str(data / "dev.conllu"),
                 "--out", str(out), *TINY]) == 0
    for f in ("model.parser", "config.resolved", "seed", "metrics.json", "run.log"):
        assert (out / f).exists(), f
    pred = tmp_path / "pred.conllu"
    assert main(["parse", "--model", str(out), "--input", str(data / "dev.conllu"), "--out", str(pred),
                 "--ignore-gold"]) == 0
    gold = read_conllu(data / "dev.conllu")
    got = read_conllu(pred)
    assert [s.forms for s in got] == [s.forms for s in gold] and all(s.heads for s in got)
    assert main(["evaluate", "--gold", str(data / "dev.conllu"), "--pred", str(pred),
                 "--out", str(tmp_path / "rep.json")]) == 0
    assert set(json.loads((tmp_path / "rep.json").read_text())) >= {"uas", "las", "ad_nc", "per_sentence"}


def test_train_tagger_from_dump_and_trees(data, tmp_path):
    dump = tmp_path / "tags.txt"
    assert main(["encode-tags", "--scheme", "rpe", "--input", str(data / "L.conllu"), "--out", str(dump)]) == 0
    assert main(["train-tagger", "--scheme", "rpe", "--input", str(dump), "--out", str(tmp_path / "a"), *TINY]) == 0
    assert (tmp_path / "a" / "tagger_RPE.tagger").exists()
    assert main(["train-tagger", "--scheme", "nc", "--input", str(data / "L.conllu"), "--dev",
                 str(data / "dev.conllu"), "--out", str(tmp_path / "b"), *TINY]) == 0
    assert "dev_accuracy" in json.loads((tmp_path / "b" / "metrics.json").read_text())


@pytest.mark.parametrize("mode", ["classic", "rg", "lm"])
def test_selftrain_baselines(data, tmp_path, mode):
    out = tmp_path / mode
    assert main(["selftrain", "--mode", mode, "--labeled", str(data / "L.conllu"), "--unlabeled",
                 str(data / "U.conllu"), "--dev", str(data / "dev.conllu"), "--out", str(out), *TINY]) == 0
    assert (out / "model.parser").exists()
    assert json.loads((out / "report.json").read_text())["mode"] == mode


def test_selftrain_dcst_is_deterministic(data, tmp_path):
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["selftrain", "--mode", "dcst", "--schemes", "nc,rpe", "--labeled", str(data / "L.conllu"),
                     "--unlabeled", str(data / "U.conllu"), "--dev", str(data / "dev.conllu"),
                     "--out", str(out), "--seed", "4", *TINY]) == 0
        runs.append(out)
    for f in ("model.parser", "base.parser", "tagger_NC.tagger", "tagger_RPE.tagger", "report.json", "config.resolved"):
        assert (runs[0] / f).read_bytes() == (runs[1] / f).read_bytes(), f


def test_selftrain_rejects_lm_scheme(data, tmp_path):
    assert main(["selftrain", "--schemes", "lm", "--labeled", str(data / "L.conllu"), "--unlabeled",
                 str(data / "U.conllu"), "--out", str(tmp_path)]) == 1


def test_numeric_failure_exit_code(data, tmp_path):
    assert main(["train-base", "--train", str(data / "L.conllu"), "--out", str(tmp_path), *TINY,
                 "--set", "lr=1e300", "--set", "epochs=3"]) == 3


def test_unknown_config_key(data, tmp_path):
    assert main(["train-base", "--train", str(data / "L.conllu"), "--out", str(tmp_path), "--set", "nope=1"]) == 1


def test_missing_embeddings_fall_back(data, tmp_path):
    assert main(["train-base", "--train", str(data / "L.conllu"), "--out", str(tmp_path), *TINY,
                 "--set", f"pretrained={tmp_path / 'absent.vec'}"]) == 0


def test_bad_embeddings_file(data, tmp_path, capsys):
    vec = tmp_path / "e.vec"
    vec.write_text("dog 1 2\n")
    assert main(["train-base", "--train", str(data / "L.conllu"), "--out", str(tmp_path / "o"), *TINY,
                 "--set", f"pretrained={vec}"]) == 2
    assert f"{vec}:1:" in capsys.readouterr().err


def test_synth_and_experiment(tmp_path, capsys):
    assert main(["synth-corpus", "--seed", "1", "--n", "40", "--out", str(tmp_path / "syn")]) == 0
    c = read_conllu(tmp_path / "syn" / "corpus.conllu")
    save_conllu(tmp_path / "src.conllu", c[:20])
    save_conllu(tmp_path / "tgt.conllu", c[20:35])
    save_conllu(tmp_path / "test.conllu", c[35:])
    cfg = tmp_path / "run.cfg"
    cfg.write_text("setup=domain_adaptation\nmodels=Base,DCST-DR\nbudget=all\nn_dev=5\nseeds=1\ntagger_epochs=1\n"
                   f"train={tmp_path / 'src.conllu'}\ntarget_train={tmp_path / 'tgt.conllu'}\n"
                   f"test={tmp_path / 'test.conllu'}\n" + "\n".join(TINY[1::2]) + "\n")
    capsys.readouterr()
    assert main(["experiment", "--config", str(cfg), "--out", str(tmp_path / "exp")]) == 0
    rows = capsys.readouterr().out.strip().split("\n")
    assert [r.split()[0] for r in rows] == ["model", "Base", "DCST-DR"]
    for f in ("config.resolved", "seed", "results.jsonl", "results.txt", "run.log"):
        assert (tmp_path / "exp" / f).exists()
