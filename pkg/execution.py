import sys
import copy
import logging
import os
import time
import traceback
from enum import Enum
import inspect

import numpy as np
import yaml

import nodes
import node_helpers
import qpcp_version
from qpcp import linalg, serialization


class ExecutionResult(Enum):
    SUCCESS = 0
    FAILURE = 1


class ExperimentConfigError(ValueError):
    pass


EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3


def is_link(obj):
    if not isinstance(obj, list) or len(obj) != 2:
        return False
    if not isinstance(obj[0], str) or isinstance(obj[1], bool) or not isinstance(obj[1], int):
        return False
    return True


def get_input_info(class_def, input_name, valid_inputs=None):
    valid_inputs = valid_inputs or class_def.INPUT_TYPES()
    input_info = None
    input_category = None
    if "required" in valid_inputs and input_name in valid_inputs["required"]:
        input_category = "required"
        input_info = valid_inputs["required"][input_name]
    elif "optional" in valid_inputs and input_name in valid_inputs["optional"]:
        input_category = "optional"
        input_info = valid_inputs["optional"][input_name]
    elif "hidden" in valid_inputs and input_name in valid_inputs["hidden"]:
        input_category = "hidden"
        input_info = valid_inputs["hidden"][input_name]
    if input_info is None:
        return None, None, None
    input_type = input_info[0] if isinstance(input_info, tuple) else input_info
    extra_info = input_info[1] if isinstance(input_info, tuple) and len(input_info) > 1 else {}
    return input_type, input_category, extra_info


def validate_node_input(received_type, input_type) -> bool:
    if received_type == "*" or input_type == "*":
        return True
    return received_type == input_type


def to_json_value(obj):
    """Plain JSON types for a report: numpy scalars and arrays, tuples and non-string keys converted."""
    if isinstance(obj, dict):
        return {str(k): to_json_value(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_json_value(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return serialization.matrix_to_json(np.atleast_2d(obj))
        return to_json_value(obj.tolist())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def normalize_experiment(experiment):
    """String node ids everywhere, including inside links."""
    if not isinstance(experiment, dict) or len(experiment) == 0:
        raise ExperimentConfigError("experiment must be a non-empty mapping of node id to node")
    out = {}
    for node_id, node in experiment.items():
        if not isinstance(node, dict):
            raise ExperimentConfigError(f"node '{node_id}' must be a mapping with class_type and inputs")
        node = copy.deepcopy(node)
        inputs = node.get("inputs") or {}
        if not isinstance(inputs, dict):
            raise ExperimentConfigError(f"node '{node_id}': inputs must be a mapping")
        for name, value in inputs.items():
            if isinstance(value, list) and len(value) == 2 and isinstance(value[1], int) and not isinstance(value[1], bool):
                inputs[name] = [str(value[0]), value[1]]
        node["inputs"] = inputs
        out[str(node_id)] = node
    return out


def get_input_data(inputs, class_def, unique_id, outputs=None, seed=0):
    valid_inputs = class_def.INPUT_TYPES()
    input_data_all = {}
    missing_keys = {}
    for x in inputs:
        input_data = inputs[x]
        input_type, input_category, input_info = get_input_info(class_def, x, valid_inputs)
        if is_link(input_data):
            input_unique_id = input_data[0]
            output_index = input_data[1]
            if outputs is None or input_unique_id not in outputs or output_index >= len(outputs[input_unique_id]):
                missing_keys[x] = True
                continue
            input_data_all[x] = outputs[input_unique_id][output_index]
        elif input_category is not None:
            input_data_all[x] = input_data

    if "hidden" in valid_inputs:
        h = valid_inputs["hidden"]
        for x in h:
            if h[x] == "SEED":
                input_data_all[x] = seed
            if h[x] == "UNIQUE_ID":
                input_data_all[x] = unique_id
    return input_data_all, missing_keys


def format_value(x):
    if x is None:
        return None
    elif isinstance(x, (int, float, bool, str)):
        return x
    else:
        return str(x)


def execute(experiment, outputs, reports, current_item, seed, executed, add_message):
    unique_id = current_item
    if unique_id in outputs:
        return (ExecutionResult.SUCCESS, None, None)

    inputs = experiment[unique_id]['inputs']
    class_type = experiment[unique_id]['class_type']
    class_def = nodes.NODE_CLASS_MAPPINGS[class_type]

    for x in inputs:
        input_data = inputs[x]
        if is_link(input_data):
            input_unique_id = input_data[0]
            if input_unique_id not in outputs:
                result = execute(experiment, outputs, reports, input_unique_id, seed, executed, add_message)
                if result[0] is not ExecutionResult.SUCCESS:
                    return result

    input_data_all = None
    try:
        input_data_all, missing_keys = get_input_data(inputs, class_def, unique_id, outputs, seed)
        if missing_keys:
            raise ValueError(f"inputs {sorted(missing_keys)} are linked to outputs that do not exist")
        add_message("executing", {"node": unique_id})
        obj = class_def()
        ret = getattr(obj, class_def.FUNCTION)(**input_data_all)
        if isinstance(ret, dict):
            if "report" in ret:
                reports[unique_id] = to_json_value(ret["report"])
            ret = ret.get("result", ())
        outputs[unique_id] = tuple(ret)
        add_message("executed", {"node": unique_id})
    except Exception as ex:
        typ, _, tb = sys.exc_info()
        exception_type = full_type_name(typ)
        input_data_formatted = {}
        if input_data_all is not None:
            for name, value in input_data_all.items():
                input_data_formatted[name] = format_value(value)

        logging.error(f"!!! Exception during processing !!! {ex}")
        logging.error(traceback.format_exc())

        error_details = {
            "node_id": unique_id,
            "exception_message": str(ex),
            "exception_type": exception_type,
            "traceback": traceback.format_tb(tb),
            "current_inputs": input_data_formatted
        }
        return (ExecutionResult.FAILURE, error_details, ex)

    executed.add(unique_id)

    return (ExecutionResult.SUCCESS, None, None)


class ExperimentExecutor:
    def __init__(self):
        self.reset()

    def reset(self):
        self.outputs = {}
        self.reports = {}
        self.status_messages = []
        self.success = True
        self.error = None
        self.exception = None

    def add_message(self, event, data: dict):
        data = {
            **data,
            "timestamp": int(time.time() * 1000),
        }
        self.status_messages.append((event, data))
        logging.debug(f"{event}: {data}")

    def handle_execution_error(self, experiment_id, experiment, executed, error, ex):
        node_id = error["node_id"]
        class_type = experiment[node_id]["class_type"]
        mes = {
            "experiment_id": experiment_id,
            "node_id": node_id,
            "node_type": class_type,
            "executed": sorted(executed),
            "exception_message": error["exception_message"],
            "exception_type": error["exception_type"],
            "traceback": error["traceback"],
            "current_inputs": error["current_inputs"],
        }
        self.add_message("execution_error", mes)

    def execute(self, experiment, experiment_id, seed=0, execute_outputs=None):
        self.reset()
        self.add_message("execution_start", {"experiment_id": experiment_id})
        if execute_outputs is None:
            execute_outputs = [x for x in experiment
                               if getattr(nodes.NODE_CLASS_MAPPINGS[experiment[x]["class_type"]], "OUTPUT_NODE", False)]

        executed = set()
        for node_id in sorted(execute_outputs):
            result, error, ex = execute(experiment, self.outputs, self.reports, node_id, seed, executed, self.add_message)
            if result == ExecutionResult.FAILURE:
                self.success = False
                self.error = error
                self.exception = ex
                self.handle_execution_error(experiment_id, experiment, executed, error, ex)
                break
        else:
            self.add_message("execution_success", {"experiment_id": experiment_id})

        self.history_result = {
            "outputs": {k: self.reports[k] for k in sorted(self.reports)},
        }


def validate_inputs(experiment, item, validated):
    unique_id = item
    if unique_id in validated:
        return validated[unique_id]

    inputs = experiment[unique_id]['inputs']
    class_type = experiment[unique_id]['class_type']
    obj_class = nodes.NODE_CLASS_MAPPINGS[class_type]

    class_inputs = obj_class.INPUT_TYPES()
    valid_inputs = set(class_inputs.get('required',{})).union(set(class_inputs.get('optional',{})))

    errors = []
    valid = True

    validate_function_inputs = []
    if hasattr(obj_class, "VALIDATE_INPUTS"):
        argspec = inspect.getfullargspec(obj_class.VALIDATE_INPUTS)
        validate_function_inputs = [a for a in argspec.args if a in valid_inputs]

    for x in sorted(set(inputs) - valid_inputs):
        errors.append({
            "type": "unknown_input",
            "message": "Input is not accepted by this node",
            "details": f"{x}",
            "extra_info": {
                "input_name": x
            }
        })

    for x in sorted(valid_inputs):
        type_input, input_category, extra_info = get_input_info(obj_class, x, class_inputs)
        assert extra_info is not None
        if x not in inputs:
            if input_category == "required":
                error = {
                    "type": "required_input_missing",
                    "message": "Required input is missing",
                    "details": f"{x}",
                    "extra_info": {
                        "input_name": x
                    }
                }
                errors.append(error)
            continue

        val = inputs[x]
        info = (type_input, extra_info)
        if isinstance(val, list) and not isinstance(type_input, list):
            if not is_link(val):
                error = {
                    "type": "bad_linked_input",
                    "message": "Bad linked input, must be a length-2 list of [node_id, slot_index]",
                    "details": f"{x}",
                    "extra_info": {
                        "input_name": x,
                        "input_config": info,
                        "received_value": val
                    }
                }
                errors.append(error)
                continue

            o_id = val[0]
            if o_id not in experiment:
                error = {
                    "type": "bad_linked_input",
                    "message": "Linked node does not exist",
                    "details": f"{x}, node '{o_id}'",
                    "extra_info": {
                        "input_name": x,
                        "linked_node": val
                    }
                }
                errors.append(error)
                continue
            o_class_type = experiment[o_id]['class_type']
            r = nodes.NODE_CLASS_MAPPINGS[o_class_type].RETURN_TYPES
            if val[1] < 0 or val[1] >= len(r):
                error = {
                    "type": "bad_linked_input",
                    "message": "Linked output index out of range",
                    "details": f"{x}, node '{o_id}' has {len(r)} outputs",
                    "extra_info": {
                        "input_name": x,
                        "linked_node": val
                    }
                }
                errors.append(error)
                continue
            received_type = r[val[1]]
            if not validate_node_input(received_type, type_input):
                details = f"{x}, received_type({received_type}) mismatch input_type({type_input})"
                error = {
                    "type": "return_type_mismatch",
                    "message": "Return type mismatch between linked nodes",
                    "details": details,
                    "extra_info": {
                        "input_name": x,
                        "input_config": info,
                        "received_type": received_type,
                        "linked_node": val
                    }
                }
                errors.append(error)
                continue
            try:
                r = validate_inputs(experiment, o_id, validated)
                if r[0] is False:
                    # `r` will be set in `validated[o_id]` already
                    valid = False
                    continue
            except Exception as ex:
                typ, _, tb = sys.exc_info()
                valid = False
                exception_type = full_type_name(typ)
                reasons = [{
                    "type": "exception_during_inner_validation",
                    "message": "Exception when validating inner node",
                    "details": str(ex),
                    "extra_info": {
                        "input_name": x,
                        "input_config": info,
                        "exception_message": str(ex),
                        "exception_type": exception_type,
                        "traceback": traceback.format_tb(tb),
                        "linked_node": val
                    }
                }]
                validated[o_id] = (False, reasons, o_id)
                continue
        else:
            if type_input in ("VERIFIER", "DENSITY", "HAMILTONIAN", "MARGINALS", "WITNESS"):
                error = {
                    "type": "link_required",
                    "message": f"Input of type {type_input} must be linked to another node",
                    "details": f"{x}",
                    "extra_info": {
                        "input_name": x,
                        "input_config": info,
                        "received_value": val
                    }
                }
                errors.append(error)
                continue
            try:
                if type_input == "INT":
                    if isinstance(val, bool) or (isinstance(val, float) and not val.is_integer()):
                        raise ValueError("not an integer")
                    val = int(val)
                    inputs[x] = val
                if type_input == "FLOAT":
                    val = float(val)
                    inputs[x] = val
                if type_input == "STRING":
                    if isinstance(val, (dict, list)):
                        raise ValueError("not a string")
                    val = str(val)
                    inputs[x] = val
                if type_input == "BOOLEAN":
                    if not isinstance(val, bool):
                        raise ValueError("not a boolean")
                    inputs[x] = val
            except Exception as ex:
                error = {
                    "type": "invalid_input_type",
                    "message": f"Failed to convert an input value to a {type_input} value",
                    "details": f"{x}, {val}, {ex}",
                    "extra_info": {
                        "input_name": x,
                        "input_config": info,
                        "received_value": val,
                        "exception_message": str(ex)
                    }
                }
                errors.append(error)
                continue

            if x not in validate_function_inputs:
                if "min" in extra_info and val < extra_info["min"]:
                    error = {
                        "type": "value_smaller_than_min",
                        "message": "Value {} smaller than min of {}".format(val, extra_info["min"]),
                        "details": f"{x}",
                        "extra_info": {
                            "input_name": x,
                            "input_config": info,
                            "received_value": val,
                        }
                    }
                    errors.append(error)
                    continue
                if "max" in extra_info and val > extra_info["max"]:
                    error = {
                        "type": "value_bigger_than_max",
                        "message": "Value {} bigger than max of {}".format(val, extra_info["max"]),
                        "details": f"{x}",
                        "extra_info": {
                            "input_name": x,
                            "input_config": info,
                            "received_value": val,
                        }
                    }
                    errors.append(error)
                    continue

                if isinstance(type_input, list):
                    if val not in type_input:
                        error = {
                            "type": "value_not_in_list",
                            "message": "Value not in list",
                            "details": f"{x}: '{val}' not in {type_input}",
                            "extra_info": {
                                "input_name": x,
                                "input_config": info,
                                "received_value": val,
                            }
                        }
                        errors.append(error)
                        continue

    constant_args = [x for x in validate_function_inputs if x in inputs and not is_link(inputs[x])]
    if len(errors) == 0 and len(validate_function_inputs) > 0 and constant_args == validate_function_inputs:
        r = obj_class.VALIDATE_INPUTS(**{x: inputs[x] for x in constant_args})
        if r is not True:
            details = ", ".join(constant_args)
            if r is not False:
                details += f" - {str(r)}"

            error = {
                "type": "custom_validation_failed",
                "message": "Custom validation failed for node",
                "details": details,
                "extra_info": {
                    "input_names": constant_args,
                }
            }
            errors.append(error)

    if len(errors) > 0 or valid is not True:
        ret = (False, errors, unique_id)
    else:
        ret = (True, [], unique_id)

    validated[unique_id] = ret
    return ret

def full_type_name(klass):
    module = klass.__module__
    if module == 'builtins':
        return klass.__qualname__
    return module + '.' + klass.__qualname__

def validate_experiment(experiment):
    outputs = set()
    for x in experiment:
        if 'class_type' not in experiment[x]:
            error = {
                "type": "invalid_experiment",
                "message": "Cannot execute because a node is missing the class_type property.",
                "details": f"Node ID '#{x}'",
                "extra_info": {}
            }
            return (False, error, [], [])

        class_type = experiment[x]['class_type']
        class_ = nodes.NODE_CLASS_MAPPINGS.get(class_type, None)
        if class_ is None:
            error = {
                "type": "invalid_experiment",
                "message": f"Cannot execute because node {class_type} does not exist.",
                "details": f"Node ID '#{x}'",
                "extra_info": {}
            }
            return (False, error, [], [])

        if hasattr(class_, 'OUTPUT_NODE') and class_.OUTPUT_NODE is True:
            outputs.add(x)

    if len(outputs) == 0:
        error = {
            "type": "experiment_no_outputs",
            "message": "Experiment has no outputs",
            "details": "",
            "extra_info": {}
        }
        return (False, error, [], [])

    good_outputs = set()
    errors = []
    node_errors = {}
    validated = {}
    for o in sorted(outputs):
        valid = False
        reasons = []
        try:
            m = validate_inputs(experiment, o, validated)
            valid = m[0]
            reasons = m[1]
        except Exception as ex:
            typ, _, tb = sys.exc_info()
            valid = False
            exception_type = full_type_name(typ)
            reasons = [{
                "type": "exception_during_validation",
                "message": "Exception when validating node",
                "details": str(ex),
                "extra_info": {
                    "exception_type": exception_type,
                    "traceback": traceback.format_tb(tb)
                }
            }]
            validated[o] = (False, reasons, o)

        if valid is True:
            good_outputs.add(o)
        else:
            logging.error(f"Failed to validate experiment for output {o}:")
            if len(reasons) > 0:
                logging.error("* (experiment):")
                for reason in reasons:
                    logging.error(f"  - {reason['message']}: {reason['details']}")
            errors += [(o, reasons)]
            for node_id, result in validated.items():
                valid = result[0]
                reasons = result[1]
                # If a node upstream has errors, the nodes downstream will also
                # be reported as invalid, but there will be no errors attached.
                # So don't return those nodes as having errors in the response.
                if valid is not True and len(reasons) > 0:
                    if node_id not in node_errors:
                        class_type = experiment[node_id]['class_type']
                        node_errors[node_id] = {
                            "errors": reasons,
                            "dependent_outputs": [],
                            "class_type": class_type
                        }
                        logging.error(f"* {class_type} {node_id}:")
                        for reason in reasons:
                            logging.error(f"  - {reason['message']}: {reason['details']}")
                    node_errors[node_id]["dependent_outputs"].append(o)
            logging.error("Output will be ignored")

    # unlike a queued prompt, an experiment with any invalid output is rejected as a whole
    if len(errors) > 0:
        errors_list = []
        for o, errs in errors:
            for error in errs:
                errors_list.append(f"{error['message']}: {error['details']}")
        errors_list = "\n".join(errors_list)

        error = {
            "type": "experiment_outputs_failed_validation",
            "message": "Experiment outputs failed validation",
            "details": errors_list,
            "extra_info": {}
        }

        return (False, error, sorted(good_outputs), node_errors)

    return (True, None, sorted(good_outputs), node_errors)


def load_config(config_path):
    """Parse a YAML or JSON experiment config into (seed, experiment)."""
    with open(config_path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        config = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"line {mark.line + 1} column {mark.column + 1}: " if mark is not None else ""
        raise ExperimentConfigError(f"{config_path}: {where}{getattr(e, 'problem', None) or e}")
    if not isinstance(config, dict):
        raise ExperimentConfigError(f"{config_path}: config must be a mapping with 'seed' and 'experiment'")
    if "experiment" not in config:
        raise ExperimentConfigError(f"{config_path}: missing field 'experiment'")
    seed = config.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ExperimentConfigError(f"{config_path}: seed must be an integer")
    return seed, normalize_experiment(config["experiment"])


def exit_code_for(ex) -> int:
    if isinstance(ex, OSError):
        return EXIT_IO
    if isinstance(ex, (serialization.SerializationError, linalg.QubitCapExceeded)):
        return EXIT_USAGE
    return EXIT_CHECK_FAILED


def run_graph(experiment, seed, report_path, experiment_id="experiment"):
    """Validate, execute and write the report of one experiment graph; returns the exit code."""
    start = time.perf_counter()
    try:
        experiment = normalize_experiment(experiment)
    except ExperimentConfigError as e:
        logging.error(str(e))
        return EXIT_USAGE
    recorded = copy.deepcopy(experiment)
    valid, error, _, node_errors = validate_experiment(experiment)
    if not valid:
        logging.error(f"{error['message']}: {error['details']}")
        return EXIT_USAGE

    executor = ExperimentExecutor()
    executor.execute(experiment, experiment_id, seed=seed)
    body = {"experiment_id": experiment_id, "seed": seed, "experiment": recorded,
            "outputs": executor.history_result["outputs"]}
    if executor.success:
        failed = node_helpers.failed_checks(body["outputs"])
        code = EXIT_CHECK_FAILED if failed else EXIT_OK
        if failed:
            logging.warning(f"checks failed in nodes {', '.join(failed)}")
    else:
        body["error"] = {k: executor.error[k] for k in ("node_id", "exception_type", "exception_message")}
        code = exit_code_for(executor.exception)

    report = {"body": body, "meta": {"wall_time": time.perf_counter() - start, "version": qpcp_version.__version__,
                                     "digest": node_helpers.body_digest(body)}}
    try:
        serialization.write_json(report_path, report)
    except OSError as e:
        logging.error(f"cannot write report {report_path}: {e}")
        return EXIT_IO
    logging.info(f"report written to {report_path} (exit code {code})")
    return code


def run_experiment(config_path, report_path=None):
    """load + validate + execute + write report for a YAML or JSON experiment config."""
    try:
        seed, experiment = load_config(config_path)
    except OSError as e:
        logging.error(f"cannot read experiment config: {e}")
        return EXIT_IO
    except ExperimentConfigError as e:
        logging.error(str(e))
        return EXIT_USAGE
    experiment_id = os.path.splitext(os.path.basename(config_path))[0]
    if report_path is None:
        import folder_paths
        report_path = os.path.join(folder_paths.get_output_directory(), f"{experiment_id}_report.json")
    return run_graph(experiment, seed, report_path, experiment_id)
