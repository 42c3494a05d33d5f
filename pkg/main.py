import qpcp.options
qpcp.options.enable_args_parsing()

import os
import sys
import logging

import folder_paths
from qpcp.cli_args import args, parser
from app.logger import setup_logger

setup_logger(log_level=args.verbose, use_stdout=args.log_stdout)


def apply_custom_paths():
    # --output-directory, --input-directory (--fixtures-directory is picked up by folder_paths itself)
    if args.output_directory:
        output_dir = os.path.abspath(args.output_directory)
        logging.info(f"Setting output directory to: {output_dir}")
        folder_paths.set_output_directory(output_dir)

    if args.input_directory:
        input_dir = os.path.abspath(args.input_directory)
        logging.info(f"Setting input directory to: {input_dir}")
        folder_paths.set_input_directory(input_dir)


def apply_limits():
    from qpcp import linalg, utils
    linalg.set_max_qubits(args.max_qubits)
    utils.set_progress_bar_enabled(not args.disable_progress_bar)


def main() -> int:
    import qpcp_version
    from qpcp import commands

    if args.command is None:
        parser.print_help()
        return 2

    apply_custom_paths()
    apply_limits()
    logging.debug(f"qpcp version: {qpcp_version.__version__}")
    return commands.run(args)


if __name__ == "__main__":
    sys.exit(main())
