"""Subcommands. Every command builds an experiment graph and runs it through the executor, so a
command line and the equivalent experiment config produce the same report body."""
from __future__ import annotations

import logging
import os

import execution
import folder_paths
from qpcp.protocols import decision_energies


class UsageError(ValueError):
    pass


def node(class_type: str, **inputs) -> dict:
    return {"class_type": class_type, "inputs": {k: v for k, v in inputs.items() if v is not None}}


def _save_path(path):
    return None if path is None else os.path.abspath(path)


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError(f"{args.command} {args.action}: {', '.join(missing)} required")


def verify_graph(args) -> dict:
    mode = "exact" if args.exact else "sampled"
    return {
        "1": node("LoadVerifier", spec=args.spec),
        "2": node("LoadProof", proof=args.proof),
        "3": node("AcceptanceProbability", verifier=["1", 0], proof=["2", 0], input=args.input, mode=mode,
                  shots=args.shots),
    }


def reduce_graph(args) -> dict:
    graph = {"1": node("LoadVerifier", spec=args.spec)}
    if args.exact:
        graph["2"] = node("ExactHamiltonian", verifier=["1", 0], input=args.input)
        graph["3"] = node("EnergyIdentityCheck", verifier=["1", 0], hamiltonian=["2", 0], input=args.input, proofs=20,
                          tolerance=1e-9)
        graph["4"] = node("GroundEnergy", hamiltonian=["2", 0])
    else:
        graph["2"] = node("LearnHamiltonian", verifier=["1", 0], input=args.input, eps=args.eps, delta=args.delta,
                          eta=args.eta or 0)
        if args.compare:
            graph["3"] = node("ExactHamiltonian", verifier=["1", 0], input=args.input)
            graph["4"] = node("CompareHamiltonians", hamiltonian=["2", 0], reference=["3", 0])
    if args.out:
        graph["5"] = node("SaveHamiltonian", hamiltonian=["2", 0], filename=_save_path(args.out))
    return graph


def ham_graph(args) -> dict:
    graph = {"1": node("LoadHamiltonian", hamiltonian=args.hamiltonian)}
    if args.action == "smooth":
        graph["2"] = node("SmoothHamiltonian", hamiltonian=["1", 0])
    elif args.action == "kitaev":
        graph["2"] = node("KitaevVerifier", hamiltonian=["1", 0], weights="given", proofs=10)
        if args.out:
            graph["3"] = node("SaveVerifier", verifier=["2", 0], filename=_save_path(args.out))
        return graph
    elif args.action == "sample":
        graph["2"] = node("SampleTerms", hamiltonian=["1", 0], samples=args.samples or 0, gamma=0.4, delta=0.1)
    else:
        graph["2"] = node("GroundEnergy", hamiltonian=["1", 0])
        return graph
    if args.out:
        graph["3"] = node("SaveHamiltonian", hamiltonian=["2", 0], filename=_save_path(args.out))
    return graph


def cldm_graph(args) -> dict:
    if args.action == "cover":
        return {"1": node("CoveringSet", num_qubits=args.num_qubits, eps=args.eps)}
    _require(args, "state", "spec")
    graph = {"1": node("LoadProof", proof=args.state), "2": node("LoadMarginalSpec", marginals=args.spec)}
    if args.action == "estimate":
        graph["3"] = node("EstimateMarginals", state=["1", 0], marginals=["2", 0], eps=args.eps, delta=args.delta,
                          psd_project=args.psd_project)
    else:
        graph["3"] = node("CLDMDecide", state=["1", 0], marginals=["2", 0], eps=args.eps, delta=args.delta,
                          alpha=args.alpha)
    return graph


def protocol_graph(args) -> dict:
    action = args.action
    if action in ("ksep", "qma", "strongred"):
        _require(args, "proof")
    graph = {"1": node("LoadHamiltonian" if action == "ksep" else "LoadVerifier",
                       **{("hamiltonian" if action == "ksep" else "spec"): args.spec})}
    proof = None
    if args.proof is not None:
        graph["2"] = node("LoadProof", proof=args.proof)
        proof = ["2", 0]
    witness = None
    if args.witness is not None and action in ("ksep", "qma"):
        graph["4"] = node("LoadWitness", witness=args.witness)
        witness = ["4", 0]

    if action == "nonadaptive":
        graph["3"] = node("NonAdaptiveSimulation", verifier=["1", 0], input=args.input, c=args.c, s=args.s,
                          repetition_cap=args.repetition_cap, proof=proof)
    elif action == "qcma":
        graph["3"] = node("QCMAPipeline", verifier=["1", 0], input=args.input, c=args.c, s=args.s)
    elif action == "ksep":
        a, b = args.a, args.b
        if a is None or b is None:
            _, a_default, b_default = decision_energies(args.c, args.s)
            a = a_default if a is None else a
            b = b_default if b is None else b
        graph["3"] = node("KSeparableCheck", hamiltonian=["1", 0], state=proof, a=a, b=b, k=args.k, witness=witness)
    elif action == "qma":
        graph["3"] = node("QMAForQPCP", verifier=["1", 0], state=proof, input=args.input, c=args.c, s=args.s,
                          witness=witness)
    else:
        graph["3"] = node("StrongErrorReduction", verifier=["1", 0], proof=proof, input=args.input,
                          rounds=args.rounds, threshold=0.5)
    return graph


def fixture_graph(args) -> dict:
    directory = os.path.abspath(args.out) if args.out else "fixtures"
    return {"1": node("GenerateFixture", family=args.family.value, params=",".join(args.param), directory=directory)}


GRAPH_BUILDERS = {
    "verify": verify_graph,
    "reduce": reduce_graph,
    "ham": ham_graph,
    "cldm": cldm_graph,
    "protocol": protocol_graph,
    "fixture": fixture_graph,
}


def report_path(args) -> str:
    path = getattr(args, "report", None)
    if path:
        return path
    name = args.command if getattr(args, "action", None) is None else f"{args.command}_{args.action}"
    return os.path.join(folder_paths.get_output_directory(), f"{name}_report.json")


def resolve_config(name: str) -> str:
    if os.path.isfile(name):
        return name
    bundled = folder_paths.get_full_path("experiments", name)
    return bundled if bundled is not None else name


def repro(out_dir) -> int:
    """Run every bundled experiment config; the exit code is the worst of the runs."""
    out_dir = out_dir or os.path.join(folder_paths.get_output_directory(), "repro")
    configs = folder_paths.get_filename_list("experiments")
    if not configs:
        logging.error("no bundled experiment configs found")
        return execution.EXIT_IO
    worst = execution.EXIT_OK
    for name in configs:
        stem = os.path.splitext(name)[0]
        code = execution.run_experiment(folder_paths.get_full_path_or_raise("experiments", name),
                                        os.path.join(out_dir, f"{stem}_report.json"))
        logging.info(f"{stem}: exit code {code}")
        worst = max(worst, code)
    return worst


def run(args) -> int:
    if args.command == "run":
        return execution.run_experiment(resolve_config(args.config), args.report)
    if args.command == "repro":
        return repro(args.out)
    try:
        graph = GRAPH_BUILDERS[args.command](args)
    except ValueError as e:
        logging.error(str(e))
        return execution.EXIT_USAGE
    return execution.run_graph(graph, getattr(args, "seed", 0), report_path(args), experiment_id=args.command)
