from __future__ import annotations

import os
import logging
from collections.abc import Collection

from qpcp.cli_args import args

supported_spec_extensions: set[str] = {'.json'}
supported_config_extensions: set[str] = {'.yaml', '.yml', '.json'}

folder_names_and_paths: dict[str, tuple[list[str], set[str]]] = {}

base_path = os.path.dirname(os.path.realpath(__file__))

folder_names_and_paths["fixtures"] = ([os.path.join(base_path, "fixtures")], supported_spec_extensions)
folder_names_and_paths["experiments"] = ([os.path.join(base_path, "experiments")], supported_config_extensions)

output_directory = os.path.join(base_path, "output")
input_directory = os.path.join(base_path, "input")

if args.fixtures_directory:
    folder_names_and_paths["fixtures"][0].insert(0, os.path.abspath(args.fixtures_directory))


def set_output_directory(output_dir: str) -> None:
    global output_directory
    output_directory = output_dir

def set_input_directory(input_dir: str) -> None:
    global input_directory
    input_directory = input_dir

def get_output_directory() -> str:
    global output_directory
    return output_directory

def get_input_directory() -> str:
    global input_directory
    return input_directory

def get_directory_by_type(type_name: str) -> str | None:
    if type_name == "output":
        return get_output_directory()
    if type_name == "input":
        return get_input_directory()
    if type_name in folder_names_and_paths:
        return folder_names_and_paths[type_name][0][0]
    return None

# determine base_dir rely on annotation if name is 'filename.ext [annotation]' format
# otherwise use default_path as base_dir
def annotated_filepath(name: str) -> tuple[str, str | None]:
    for annotation in ("output", "input", "fixtures", "experiments"):
        suffix = f" [{annotation}]"
        if name.endswith(suffix):
            return name[:-len(suffix)], get_directory_by_type(annotation)
    return name, None


def get_annotated_filepath(name: str, default_dir: str | None=None) -> str:
    name, base_dir = annotated_filepath(name)

    if base_dir is None:
        if default_dir is not None:
            base_dir = default_dir
        else:
            base_dir = get_input_directory()  # fallback path

    return os.path.join(base_dir, name)


def add_folder_path(folder_name: str, full_folder_path: str, is_default: bool = False) -> None:
    global folder_names_and_paths
    paths, extensions = folder_names_and_paths.setdefault(folder_name, ([], set()))
    if full_folder_path in paths:
        if is_default and paths[0] != full_folder_path:
            paths.remove(full_folder_path)
            paths.insert(0, full_folder_path)
    elif is_default:
        paths.insert(0, full_folder_path)
    else:
        paths.append(full_folder_path)


def get_folder_paths(folder_name: str) -> list[str]:
    return folder_names_and_paths[folder_name][0][:]


def filter_files_extensions(files: Collection[str], extensions: Collection[str]) -> list[str]:
    return sorted(list(filter(lambda a: os.path.splitext(a)[-1].lower() in extensions or len(extensions) == 0, files)))


def get_full_path(folder_name: str, filename: str) -> str | None:
    global folder_names_and_paths
    if folder_name not in folder_names_and_paths:
        return None
    folders = folder_names_and_paths[folder_name]
    filename = os.path.relpath(os.path.join("/", filename), "/")
    for x in folders[0]:
        full_path = os.path.join(x, filename)
        if os.path.isfile(full_path):
            return full_path
        elif os.path.islink(full_path):
            logging.warning("WARNING path {} exists but doesn't link anywhere, skipping.".format(full_path))

    return None


def get_full_path_or_raise(folder_name: str, filename: str) -> str:
    full_path = get_full_path(folder_name, filename)
    if full_path is None:
        raise FileNotFoundError(f"File in folder '{folder_name}' with filename '{filename}' not found.")
    return full_path


def resolve_input_path(name: str) -> str:
    """Find a spec, proof or witness file: annotated name, existing path, input directory, bundled fixtures."""
    stripped, base_dir = annotated_filepath(name)
    if base_dir is not None:
        path = os.path.join(base_dir, stripped)
        if not os.path.isfile(path):
            raise FileNotFoundError(f"{name}: no such file {path}")
        return path
    if os.path.isfile(name):
        return name
    path = os.path.join(get_input_directory(), name)
    if os.path.isfile(path):
        return path
    path = get_full_path("fixtures", name)
    if path is not None:
        return path
    raise FileNotFoundError(f"{name}: not found as a path, in {get_input_directory()} or among bundled fixtures")


def get_filename_list(folder_name: str) -> list[str]:
    output_list = set()
    folders = folder_names_and_paths[folder_name]
    for x in folders[0]:
        if not os.path.isdir(x):
            continue
        output_list.update(filter_files_extensions(os.listdir(x), folders[1]))
    return sorted(list(output_list))


def get_save_path(filename_prefix: str, extension: str = ".json", output_dir: str | None = None) -> str:
    """Path for a generated file; `filename_prefix` may contain subdirectories."""
    output_dir = get_output_directory() if output_dir is None else output_dir
    full_path = os.path.abspath(os.path.join(output_dir, filename_prefix + extension))
    if os.path.commonpath((os.path.abspath(output_dir), full_path)) != os.path.abspath(output_dir):
        raise ValueError(f"Saving {filename_prefix} outside the output folder is not allowed.\n"
                         f" full_path: {full_path}\n output_dir: {output_dir}")
    os.makedirs(os.path.dirname(full_path), exist_ok=True)
    return full_path
