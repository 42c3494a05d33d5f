import os

import pytest

import folder_paths


@pytest.fixture
def input_dir(tmp_path, monkeypatch):
    monkeypatch.setattr(folder_paths, "input_directory", str(tmp_path))
    return str(tmp_path)


def touch(directory, name):
    path = os.path.join(directory, name)
    with open(path, "w") as f:
        f.write("{}")
    return path


def test_bundled_fixture(input_dir):
    path = folder_paths.resolve_input_path("copy_qubit.json")
    assert path == os.path.join(folder_paths.base_path, "fixtures", "copy_qubit.json")


def test_input_directory_shadows_fixtures(input_dir):
    local = touch(input_dir, "copy_qubit.json")
    assert folder_paths.resolve_input_path("copy_qubit.json") == local


def test_existing_path(tmp_path, input_dir):
    other = tmp_path / "elsewhere"
    other.mkdir()
    path = touch(str(other), "v.json")
    assert folder_paths.resolve_input_path(path) == path


def test_annotated_name(input_dir):
    touch(input_dir, "proof_00.json")
    assert folder_paths.resolve_input_path("proof_00.json [fixtures]").startswith(folder_paths.get_folder_paths("fixtures")[0])
    assert folder_paths.resolve_input_path("proof_00.json [input]") == os.path.join(input_dir, "proof_00.json")
    with pytest.raises(FileNotFoundError):
        folder_paths.resolve_input_path("missing.json [input]")


def test_missing(input_dir):
    with pytest.raises(FileNotFoundError):
        folder_paths.resolve_input_path("missing.json")


def test_save_path_stays_in_the_output_directory(tmp_path):
    path = folder_paths.get_save_path("reports/h", output_dir=str(tmp_path))
    assert path == os.path.join(str(tmp_path), "reports", "h.json")
    assert os.path.isdir(os.path.dirname(path))
    with pytest.raises(ValueError):
        folder_paths.get_save_path("../escape", output_dir=str(tmp_path))


def test_experiment_listing():
    names = folder_paths.get_filename_list("experiments")
    assert "acceptance.yaml" in names
    assert names == sorted(names)
    assert "copy_qubit.json" in folder_paths.get_filename_list("fixtures")
