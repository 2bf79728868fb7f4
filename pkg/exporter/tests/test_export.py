import numpy as np
import pytest
from PIL import Image

from sleb_export.encoders import MockEncoder, load_encoder
from sleb_export.errors import EmptyInputError, LabelError, ModelLoadError
from sleb_export.export import ExportJob, export_image_embeddings, export_text_embeddings


def write_labels(path, names):
    path.write_text("".join(f"{n}\n" for n in names), encoding="utf-8")


def make_image_tree(root, per_class=3, classes=("ant", "bee")):
    rng = np.random.default_rng(5)
    for cls in classes:
        d = root / cls
        d.mkdir(parents=True)
        for i in range(per_class):
            pixels = rng.integers(0, 255, size=(8, 8, 3), dtype=np.uint8)
            Image.fromarray(pixels).save(d / f"img_{i}.png")


class TestMockEncoder:
    def test_text_rows_are_unit_and_deterministic(self):
        enc = MockEncoder(dim=32)
        a = enc.encode_texts(["a photo of a cat", "a photo of a dog"])
        b = enc.encode_texts(["a photo of a cat", "a photo of a dog"])
        assert a.shape == (2, 32)
        np.testing.assert_array_equal(a, b)
        np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1.0, atol=1e-5)

    def test_distinct_texts_differ(self):
        enc = MockEncoder(dim=32)
        m = enc.encode_texts(["cat", "dog"])
        assert not np.allclose(m[0], m[1])

    def test_model_id_parsing(self):
        assert load_encoder("mock").dim == 512
        assert load_encoder("mock:16").dim == 16
        with pytest.raises(ModelLoadError):
            load_encoder("mock:banana")

    def test_unknown_checkpoint_is_model_load_error(self):
        with pytest.raises(ModelLoadError):
            load_encoder("definitely/not-a-real-checkpoint-xyz")


class TestTextExport:
    def test_writes_aligned_outputs(self, tmp_path):
        labels = tmp_path / "labels.txt"
        write_labels(labels, ["cat", "dog", "newt"])
        job = ExportJob(model="mock:24", input_path=str(labels),
                        out_embeddings=str(tmp_path / "t.sleb"),
                        out_labels=str(tmp_path / "out_labels.txt"))
        assert export_text_embeddings(job) == 3
        assert (tmp_path / "out_labels.txt").read_text() == "cat\ndog\nnewt\n"

    def test_duplicate_labels_rejected(self, tmp_path):
        labels = tmp_path / "labels.txt"
        write_labels(labels, ["cat", "cat"])
        job = ExportJob(model="mock:8", input_path=str(labels),
                        out_embeddings=str(tmp_path / "t.sleb"))
        with pytest.raises(LabelError):
            export_text_embeddings(job)

    def test_empty_label_file_rejected(self, tmp_path):
        labels = tmp_path / "labels.txt"
        labels.write_text("", encoding="utf-8")
        job = ExportJob(model="mock:8", input_path=str(labels),
                        out_embeddings=str(tmp_path / "t.sleb"))
        with pytest.raises(EmptyInputError):
            export_text_embeddings(job)

    def test_template_must_have_placeholder(self, tmp_path):
        with pytest.raises(LabelError):
            ExportJob(model="mock:8", input_path="x", out_embeddings="y",
                      prompt_template="no placeholder")

    def test_re_export_rows_match(self, tmp_path):
        labels = tmp_path / "labels.txt"
        write_labels(labels, [f"class{i}" for i in range(6)])
        outs = []
        for name in ("a.sleb", "b.sleb"):
            job = ExportJob(model="mock:32", input_path=str(labels),
                            out_embeddings=str(tmp_path / name))
            export_text_embeddings(job)
            outs.append((tmp_path / name).read_bytes())
        assert outs[0] == outs[1]

    def test_template_changes_embeddings(self, tmp_path):
        labels = tmp_path / "labels.txt"
        write_labels(labels, ["cat"])
        rows = []
        for template in ("a photo of a {}", "a sketch of a {}"):
            out = tmp_path / f"{template[:4].strip()}.sleb"
            job = ExportJob(model="mock:16", input_path=str(labels),
                            out_embeddings=str(out), prompt_template=template)
            export_text_embeddings(job)
            rows.append(out.read_bytes())
        assert rows[0] != rows[1]


class TestImageExport:
    def test_manifest_alignment_and_labels(self, tmp_path):
        tree = tmp_path / "imgs"
        make_image_tree(tree)
        job = ExportJob(model="mock:16", input_path=str(tree),
                        out_embeddings=str(tmp_path / "i.sleb"),
                        out_manifest=str(tmp_path / "m.csv"))
        rows = export_image_embeddings(job)
        lines = (tmp_path / "m.csv").read_text().splitlines()
        assert lines[0] == "filename,row,label"
        assert len(lines) == rows + 1
        # lexicographic order and folder-derived labels
        assert lines[1].startswith("ant/img_0.png,0,ant")
        assert lines[-1].endswith("bee")

    def test_empty_directory_rejected(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        job = ExportJob(model="mock:16", input_path=str(empty),
                        out_embeddings=str(tmp_path / "i.sleb"))
        with pytest.raises(EmptyInputError):
            export_image_embeddings(job)

    def test_undecodable_image_skipped(self, tmp_path, caplog):
        tree = tmp_path / "imgs"
        make_image_tree(tree, per_class=2, classes=("ant",))
        (tree / "ant" / "broken.png").write_bytes(b"this is not a png")
        job = ExportJob(model="mock:16", input_path=str(tree),
                        out_embeddings=str(tmp_path / "i.sleb"),
                        out_manifest=str(tmp_path / "m.csv"))
        rows = export_image_embeddings(job)
        assert rows == 2
        manifest = (tmp_path / "m.csv").read_text()
        assert "broken.png" not in manifest

    def test_flat_folder_has_empty_labels(self, tmp_path):
        flat = tmp_path / "flat"
        flat.mkdir()
        rng = np.random.default_rng(3)
        for i in range(2):
            pixels = rng.integers(0, 255, size=(4, 4, 3), dtype=np.uint8)
            Image.fromarray(pixels).save(flat / f"x{i}.png")
        job = ExportJob(model="mock:16", input_path=str(flat),
                        out_embeddings=str(tmp_path / "i.sleb"),
                        out_manifest=str(tmp_path / "m.csv"))
        export_image_embeddings(job)
        lines = (tmp_path / "m.csv").read_text().splitlines()[1:]
        assert all(line.endswith(",") for line in lines)
