from __future__ import annotations

import logging
import math
import os

import numpy as np

import folder_paths
import node_helpers
from qpcp import fixtures, linalg, serialization
from qpcp.hamiltonian import (ground_energy, kitaev_verifier, perturb_weighted, sample_count, sample_terms,
                              sampling_failure_bound, smooth, weighted_error_check)
from qpcp.linalg import (DensityMatrix, eigh_hermitian, operator_norm, partial_trace, random_density_matrix,
                         random_pure_density)
from qpcp.protocols import (DEFAULT_DELTA, and_of_verifiers, gentle_measurement_check, honest_classical_witness,
                            k_separable_check, nonadaptive_simulation, qcma_pipeline, qma_for_qpcp, register_qubits,
                            strong_error_reduction)
from qpcp.reduction import (LocalHamiltonian, exact_hamiltonian, hadamard_shots, learn_hamiltonian,
                            learn_hamiltonian_rounded, learning_parameters)
from qpcp.rng import RandomStream
from qpcp.tomography import (audit_covering_set, build_covering_set, cldm_copy_count, cldm_decide, cldm_distances,
                             estimate_marginals, marginal_shot_count)
from qpcp.verifier import accept_probability_exact, path_distribution, sample_run

MAX_SHOTS = 10 ** 7
IDENTITY_TOLERANCE = 1e-9

VERIFIER_FAMILIES = ["reject-always", "accept-always", "random-q1", "random-q2"]


def node_stream(seed, unique_id) -> RandomStream:
    return RandomStream(int(seed), f"node={unique_id}")


def _hidden():
    return {"seed": "SEED", "unique_id": "UNIQUE_ID"}


def _uniform(h: LocalHamiltonian) -> LocalHamiltonian:
    m = len(h.terms)
    return LocalHamiltonian(h.num_qubits, h.terms, weights=tuple([1.0 / m] * m), locality=h.locality)


def _path_list(dist: dict) -> list[dict]:
    return [{"path": list(path), "probability": p} for path, p in sorted(dist.items())]


class LoadVerifier:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"spec": ("STRING", {"default": "reject_always.json", "tooltip": "Verifier spec JSON: a path, a name in the input directory or a bundled fixture."})}}

    RETURN_TYPES = ("VERIFIER",)
    FUNCTION = "load"
    CATEGORY = "loaders"

    def load(self, spec):
        path = folder_paths.resolve_input_path(spec)
        return (serialization.verifier_from_json(serialization.read_json(path), where=spec),)


class LoadProof:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"proof": ("STRING", {"default": "proof_00.json"})}}

    RETURN_TYPES = ("DENSITY",)
    FUNCTION = "load"
    CATEGORY = "loaders"
    DESCRIPTION = "Loads a density matrix, or a state vector given by amplitudes."

    def load(self, proof):
        path = folder_paths.resolve_input_path(proof)
        return (serialization.density_from_json(serialization.read_json(path), where=proof),)


class LoadHamiltonian:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"hamiltonian": ("STRING", {"default": "product_hamiltonian.json"})}}

    RETURN_TYPES = ("HAMILTONIAN",)
    FUNCTION = "load"
    CATEGORY = "loaders"

    def load(self, hamiltonian):
        path = folder_paths.resolve_input_path(hamiltonian)
        return (serialization.hamiltonian_from_json(serialization.read_json(path), where=hamiltonian),)


class LoadMarginalSpec:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"marginals": ("STRING", {"default": "ghz_marginals.json"})}}

    RETURN_TYPES = ("MARGINALS",)
    FUNCTION = "load"
    CATEGORY = "loaders"

    def load(self, marginals):
        path = folder_paths.resolve_input_path(marginals)
        return (serialization.marginal_spec_from_json(serialization.read_json(path), where=marginals),)


class LoadWitness:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"witness": ("STRING", {"default": "product_witness.json"})}}

    RETURN_TYPES = ("WITNESS",)
    FUNCTION = "load"
    CATEGORY = "loaders"

    def load(self, witness):
        path = folder_paths.resolve_input_path(witness)
        return (serialization.witness_from_json(serialization.read_json(path), where=witness),)


class FixtureVerifier:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {"family": (VERIFIER_FAMILIES,)},
            "optional": {
                "n": ("INT", {"default": 0, "min": 0, "max": 8}),
                "p1": ("INT", {"default": 2, "min": 1, "max": 8}),
                "k": ("INT", {"default": 1, "min": 1, "max": 4}),
                "p2": ("INT", {"default": 2, "min": 1, "max": 8}),
                "q": ("INT", {"default": 1, "min": 1, "max": 4}),
            },
            "hidden": _hidden(),
        }

    RETURN_TYPES = ("VERIFIER",)
    FUNCTION = "generate"
    CATEGORY = "fixtures"
    DESCRIPTION = "Builds a verifier from a named fixture family; random families draw from the node's seeded stream."

    def generate(self, family, seed=0, unique_id=None, **params):
        files = fixtures.generate_fixture(family, params, node_stream(seed, unique_id))
        return (serialization.verifier_from_json(files["verifier.json"]),)


class RandomProof:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {"verifier": ("VERIFIER",), "pure": ("BOOLEAN", {"default": False})},
            "hidden": _hidden(),
        }

    RETURN_TYPES = ("DENSITY",)
    FUNCTION = "generate"
    CATEGORY = "fixtures"

    def generate(self, verifier, pure, seed=0, unique_id=None):
        gen = node_stream(seed, unique_id).generator
        n = verifier.num_proof_qubits
        return (random_pure_density(n, gen) if pure else random_density_matrix(n, gen),)


class BasisProof:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"bits": ("STRING", {"default": "00", "tooltip": "One bit per proof qubit, qubit 0 first."})}}

    RETURN_TYPES = ("DENSITY",)
    FUNCTION = "generate"
    CATEGORY = "fixtures"

    @classmethod
    def VALIDATE_INPUTS(s, bits):
        if not bits or set(bits) - {"0", "1"}:
            return f"'{bits}' is not a bitstring"
        return True

    def generate(self, bits):
        return (DensityMatrix.basis(bits),)


class RandomHamiltonian:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {
                "num_qubits": ("INT", {"default": 3, "min": 1, "max": 10}),
                "num_terms": ("INT", {"default": 4, "min": 1, "max": 1000}),
                "locality": ("INT", {"default": 1, "min": 1, "max": 4}),
                "weighted": ("BOOLEAN", {"default": False}),
            },
            "hidden": _hidden(),
        }

    RETURN_TYPES = ("HAMILTONIAN",)
    FUNCTION = "generate"
    CATEGORY = "fixtures"

    def generate(self, num_qubits, num_terms, locality, weighted, seed=0, unique_id=None):
        return (fixtures.random_psd_hamiltonian(node_stream(seed, unique_id), num_qubits, num_terms, locality, weighted),)


class AcceptanceProbability:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {
                "verifier": ("VERIFIER",),
                "proof": ("DENSITY",),
                "input": ("STRING", {"default": ""}),
                "mode": (["exact", "sampled"],),
            },
            "optional": {"shots": ("INT", {"default": 1000, "min": 1, "max": MAX_SHOTS})},
            "hidden": _hidden(),
        }

    RETURN_TYPES = ()
    FUNCTION = "measure"
    OUTPUT_NODE = True
    CATEGORY = "verifier"
    DESCRIPTION = "Exact branching acceptance probability, or a seeded Monte-Carlo estimate from independent runs."

    def measure(self, verifier, proof, input, mode, shots=1000, seed=0, unique_id=None):
        if mode == "exact":
            dist = path_distribution(verifier, input, proof)
            report = {"mode": mode, "accept_probability": accept_probability_exact(verifier, input, proof),
                      "paths": _path_list(dist)}
            return {"report": report}

        stream = node_stream(seed, unique_id)
        accepts = 0
        counts: dict[tuple, int] = {}
        for i in range(shots):
            path, bit = sample_run(verifier, input, proof, stream.child(f"shot={i}"))
            accepts += bit
            counts[path.indices] = counts.get(path.indices, 0) + 1
        estimate = accepts / shots
        report = {"mode": mode, "shots": shots, "accepts": accepts, "estimate": estimate,
                  "stderr": math.sqrt(max(estimate * (1 - estimate), 0.0) / shots),
                  "paths": [{"path": list(p), "count": c} for p, c in sorted(counts.items())]}
        return {"report": report}


class ExactHamiltonian:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"verifier": ("VERIFIER",), "input": ("STRING", {"default": ""})}}

    RETURN_TYPES = ("HAMILTONIAN",)
    FUNCTION = "reduce"
    CATEGORY = "reduction"

    def reduce(self, verifier, input):
        return (exact_hamiltonian(verifier, input),)


class LearnHamiltonian:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {
                "verifier": ("VERIFIER",),
                "input": ("STRING", {"default": ""}),
                "eps": ("FLOAT", {"default": 0.1, "min": 1e-6, "max": 0.999999}),
                "delta": ("FLOAT", {"default": 0.2, "min": 1e-9, "max": 0.999999}),
                "eta": ("INT", {"default": 0, "min": 0, "max": 64, "tooltip": "Grid bits for rounded learning; 0 learns without rounding."}),
            },
            "hidden": _hidden(),
        }

    RETURN_TYPES = ("HAMILTONIAN",)
    FUNCTION = "learn"
    OUTPUT_NODE = True
    CATEGORY = "reduction"
    DESCRIPTION = "Estimates every term of the verifier's Hamiltonian with Hadamard tests."

    def learn(self, verifier, input, eps, delta, eta, seed=0, unique_id=None):
        stream = node_stream(seed, unique_id)
        params = learning_parameters(verifier, eps, delta)
        report = {"eps": eps, "delta": delta, "num_sets": params["num_sets"], "gamma": params["gamma"]}
        if eta > 0:
            h = learn_hamiltonian_rounded(verifier, input, eta, delta, stream)
            report["eta"] = eta
            report["shots_per_part"] = hadamard_shots(2 / (2 ** eta + 1), params["delta_prime"])
        else:
            h = learn_hamiltonian(verifier, input, eps, delta, stream)
            report["eps_prime"] = params["eps_prime"]
            report["shots_per_part"] = hadamard_shots(params["eps_prime"], params["delta_prime"])
        report["delta_prime"] = params["delta_prime"]
        return {"report": report, "result": (h,)}


class EnergyIdentityCheck:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {
                "verifier": ("VERIFIER",),
                "hamiltonian": ("HAMILTONIAN",),
                "input": ("STRING", {"default": ""}),
                "proofs": ("INT", {"default": 20, "min": 1, "max": 10000}),
                "tolerance": ("FLOAT", {"default": IDENTITY_TOLERANCE, "min": 0.0, "max": 1.0}),
            },
            "hidden": _hidden(),
        }

    RETURN_TYPES = ()
    FUNCTION = "check"
    OUTPUT_NODE = True
    CATEGORY = "reduction"
    DESCRIPTION = "Largest |Pr[accept] - (1 - tr[H xi])| over seeded random proofs."

    def check(self, verifier, hamiltonian, input, proofs, tolerance, seed=0, unique_id=None):
        stream = node_stream(seed, unique_id)
        residual = 0.0
        for i in range(proofs):
            xi = random_density_matrix(verifier.num_proof_qubits, stream.child(f"proof={i}").generator)
            p = accept_probability_exact(verifier, input, xi)
            residual = max(residual, abs(p - (1 - hamiltonian.energy(xi))))
        return {"report": node_helpers.check(residual <= tolerance, proofs=proofs, residual=residual, tolerance=tolerance)}


class CompareHamiltonians:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {"hamiltonian": ("HAMILTONIAN",), "reference": ("HAMILTONIAN",)},
            "optional": {"tolerance": ("FLOAT", {"default": 0.0, "min": 0.0, "max": 10.0, "tooltip": "0 reports without checking."})},
        }

    RETURN_TYPES = ()
    FUNCTION = "compare"
    OUTPUT_NODE = True
    CATEGORY = "reduction"

    def compare(self, hamiltonian, reference, tolerance=0.0):
        error = operator_norm(hamiltonian.to_matrix() - reference.to_matrix())
        report = {"norm_error": error}
        supports = [t.support for t in hamiltonian.terms]
        if supports == [t.support for t in reference.terms]:
            report["term_errors"] = [{"support": list(a.support), "error": operator_norm(a.matrix - b.matrix)}
                                     for a, b in zip(hamiltonian.terms, reference.terms)]
        if tolerance > 0:
            report = node_helpers.check(error <= tolerance, tolerance=tolerance, **report)
        return {"report": report}


class SmoothHamiltonian:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"hamiltonian": ("HAMILTONIAN",)},
                "optional": {"tolerance": ("FLOAT", {"default": 1e-10, "min": 0.0, "max": 1.0})}}

    RETURN_TYPES = ("HAMILTONIAN",)
    FUNCTION = "smooth"
    OUTPUT_NODE = True
    CATEGORY = "hamiltonian"
    DESCRIPTION = "Splits heavy terms so that H' = H / 2^(q+3) has m terms each between 0 and I."

    def smooth(self, hamiltonian, tolerance=1e-10):
        smoothed = smooth(hamiltonian)
        scale = 2.0 ** (hamiltonian.locality + 3)
        original = hamiltonian.to_matrix()
        rescaled = smoothed.to_matrix() * scale
        identity = float(np.max(np.abs(rescaled - original)))
        spectrum = float(np.max(np.abs(eigh_hermitian(rescaled)[0] - eigh_hermitian(original)[0])))
        lowest = min(float(eigh_hermitian(t.matrix)[0][0]) for t in smoothed.terms)
        highest = smoothed.max_term_norm()
        passed = identity <= tolerance and spectrum <= tolerance and lowest >= -tolerance and highest <= 1 + tolerance
        report = node_helpers.check(passed, terms=len(smoothed.terms), locality=smoothed.locality, scale=scale,
                                    identity_residual=identity, spectrum_residual=spectrum,
                                    min_term_eigenvalue=lowest, max_term_norm=highest)
        return {"report": report, "result": (smoothed,)}


class KitaevVerifier:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {
                "hamiltonian": ("HAMILTONIAN",),
                "weights": (["given", "uniform"], {"tooltip": "uniform reads unweighted terms as H = (1/m) sum H_i."}),
                "proofs": ("INT", {"default": 10, "min": 0, "max": 10000}),
            },
            "hidden": _hidden(),
        }

    RETURN_TYPES = ("VERIFIER",)
    FUNCTION = "build"
    OUTPUT_NODE = True
    CATEGORY = "hamiltonian"
    DESCRIPTION = "Energy-estimation verifier accepting with probability 1 - tr[H xi]."

    def build(self, hamiltonian, weights, proofs, seed=0, unique_id=None):
        h = _uniform(hamiltonian) if weights == "uniform" or hamiltonian.weights is None else hamiltonian
        v = kitaev_verifier(h)
        stream = node_stream(seed, unique_id)
        residual = 0.0
        for i in range(proofs):
            xi = random_density_matrix(h.num_qubits, stream.child(f"proof={i}").generator)
            residual = max(residual, abs(accept_probability_exact(v, "", xi) - (1 - h.energy(xi))))
        report = node_helpers.check(residual <= IDENTITY_TOLERANCE, q=v.q, p1=v.p1, p2=v.p2, num_qubits=v.num_qubits,
                                    proofs=proofs, residual=residual)
        return {"report": report, "result": (v,)}


class SampleTerms:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {
                "hamiltonian": ("HAMILTONIAN",),
                "samples": ("INT", {"default": 0, "min": 0, "max": 10 ** 6, "tooltip": "0 uses the sample count for gamma and delta."}),
                "gamma": ("FLOAT", {"default": 0.4, "min": 1e-6, "max": 1.0}),
                "delta": ("FLOAT", {"default": 0.1, "min": 1e-9, "max": 1.0}),
            },
            "optional": {"smooth_output": ("BOOLEAN", {"default": True})},
            "hidden": _hidden(),
        }

    RETURN_TYPES = ("HAMILTONIAN",)
    FUNCTION = "sample"
    OUTPUT_NODE = True
    CATEGORY = "hamiltonian"

    def sample(self, hamiltonian, samples, gamma, delta, smooth_output=True, seed=0, unique_id=None):
        h = hamiltonian if hamiltonian.weights is not None else _uniform(hamiltonian)
        l = samples if samples > 0 else sample_count(gamma, h.num_qubits, delta)
        g = sample_terms(h, l, node_stream(seed, unique_id), smooth_output=False)
        error = operator_norm(h.to_matrix() - g.to_matrix())
        if smooth_output:
            g = smooth(g)
        report = {"samples": l, "norm_error": error, "threshold": gamma / 4, "within": bool(error < gamma / 4),
                  "failure_bound": sampling_failure_bound(h.num_qubits, gamma, l)}
        return {"report": report, "result": (g,)}


class GroundEnergy:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"hamiltonian": ("HAMILTONIAN",)}}

    RETURN_TYPES = ()
    FUNCTION = "ground"
    OUTPUT_NODE = True
    CATEGORY = "hamiltonian"

    def ground(self, hamiltonian):
        return {"report": {"ground_energy": ground_energy(hamiltonian), "norm": hamiltonian.norm(),
                           "terms": len(hamiltonian.terms), "locality": hamiltonian.locality,
                           "num_qubits": hamiltonian.num_qubits, "psd_terms": hamiltonian.is_psd()}}


class WeightedErrorCheck:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {
                "hamiltonian": ("HAMILTONIAN",),
                "eps": ("FLOAT", {"default": 0.1, "min": 1e-9, "max": 1.0}),
                "perturbations": ("INT", {"default": 100, "min": 1, "max": 100000}),
            },
            "hidden": _hidden(),
        }

    RETURN_TYPES = ()
    FUNCTION = "check"
    OUTPUT_NODE = True
    CATEGORY = "hamiltonian"
    DESCRIPTION = "Perturbs weights by eps/(8m^2) and terms by eps/6 and checks ||H - H~|| <= eps every time."

    def check(self, hamiltonian, eps, perturbations, seed=0, unique_id=None):
        h = hamiltonian if hamiltonian.weights is not None else _uniform(hamiltonian)
        m = len(h.terms)
        eps0, eps1 = eps / (8 * m * m), eps / 6
        stream = node_stream(seed, unique_id)
        worst = 0.0
        holds = True
        for i in range(perturbations):
            h_tilde, p_tilde = perturb_weighted(h, eps0, eps1, stream.child(f"perturbation={i}"))
            result = weighted_error_check(h, h_tilde, eps0, eps1, p_tilde=p_tilde)
            worst = max(worst, result.measured)
            holds = holds and result.holds
        return {"report": node_helpers.check(worst <= eps and holds, eps=eps, eps0=eps0, eps1=eps1,
                                             perturbations=perturbations, worst=worst)}


class SaveHamiltonian:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"hamiltonian": ("HAMILTONIAN",),
                             "filename": ("STRING", {"default": "qpcp/hamiltonian.json", "tooltip": "Absolute path, or a path under the output directory."})}}

    RETURN_TYPES = ()
    FUNCTION = "save"
    OUTPUT_NODE = True
    CATEGORY = "io"

    def save(self, hamiltonian, filename):
        obj = serialization.hamiltonian_to_json(hamiltonian)
        _write(filename, obj)
        return {"report": {"file": filename, "digest": node_helpers.body_digest(obj)}}


class SaveVerifier:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"verifier": ("VERIFIER",),
                             "filename": ("STRING", {"default": "qpcp/verifier.json"})}}

    RETURN_TYPES = ()
    FUNCTION = "save"
    OUTPUT_NODE = True
    CATEGORY = "io"

    def save(self, verifier, filename):
        obj = serialization.verifier_to_json(verifier)
        _write(filename, obj)
        return {"report": {"file": filename, "digest": node_helpers.body_digest(obj)}}


def _write(filename: str, obj) -> str:
    if os.path.isabs(filename):
        path = filename
    else:
        stem, extension = os.path.splitext(filename)
        path = folder_paths.get_save_path(stem, extension or ".json")
    serialization.write_json(path, obj)
    logging.info(f"wrote {path}")
    return path


class EstimateMarginals:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {
                "state": ("DENSITY",),
                "marginals": ("MARGINALS",),
                "eps": ("FLOAT", {"default": 0.1, "min": 1e-6, "max": 0.999999}),
                "delta": ("FLOAT", {"default": 0.1, "min": 1e-9, "max": 0.999999}),
            },
            "optional": {"psd_project": ("BOOLEAN", {"default": False})},
            "hidden": _hidden(),
        }

    RETURN_TYPES = ()
    FUNCTION = "estimate"
    OUTPUT_NODE = True
    CATEGORY = "tomography"

    def estimate(self, state, marginals, eps, delta, psd_project=False, seed=0, unique_id=None):
        estimates = estimate_marginals(state, marginals.subsets, eps, delta, node_stream(seed, unique_id))
        if psd_project:
            estimates = [linalg.psd_project(e) for e in estimates]
        m = len(marginals.subsets)
        report = {"eps": eps, "delta": delta, "psd_project": psd_project,
                  "shots": [marginal_shot_count(1 << len(s), m, eps, delta) for s in marginals.subsets],
                  "estimates": [serialization.matrix_to_json(e) for e in estimates]}
        if marginals.targets:
            distances = cldm_distances(estimates, marginals.targets)
            report = node_helpers.check(max(distances) <= eps, distances=distances, **report)
        return {"report": report}


class CLDMDecide:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {
                "state": ("DENSITY",),
                "marginals": ("MARGINALS",),
                "eps": ("FLOAT", {"default": 0.1, "min": 1e-6, "max": 0.999999}),
                "delta": ("FLOAT", {"default": 0.1, "min": 1e-9, "max": 0.999999}),
                "alpha": ("FLOAT", {"default": 0.0, "min": 0.0, "max": 2.0}),
            },
            "hidden": _hidden(),
        }

    RETURN_TYPES = ()
    FUNCTION = "decide"
    OUTPUT_NODE = True
    CATEGORY = "tomography"
    DESCRIPTION = "Accepts iff every estimated marginal lies within alpha + eps of its target in trace norm."

    @classmethod
    def VALIDATE_INPUTS(s, alpha):
        if alpha < 0:
            return "alpha must be nonnegative"
        return True

    def decide(self, state, marginals, eps, delta, alpha, seed=0, unique_id=None):
        if not marginals.targets:
            raise ValueError("consistency decisions need target marginals")
        estimates = estimate_marginals(state, marginals.subsets, eps, delta, node_stream(seed, unique_id))
        q = max(len(s) for s in marginals.subsets)
        copies, symmetrization = cldm_copy_count(len(marginals.subsets), q, eps, delta, state.num_qubits)
        report = {"accept": cldm_decide(estimates, marginals.targets, alpha, eps), "alpha": alpha, "eps": eps,
                  "delta": delta, "distances": cldm_distances(estimates, marginals.targets),
                  "copies": copies, "symmetrization": symmetrization}
        return {"report": report}


class CoveringSet:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {
                "num_qubits": ("INT", {"default": 1, "min": 1, "max": 2}),
                "eps": ("FLOAT", {"default": 0.3, "min": 0.01, "max": 1.0}),
            },
            "optional": {
                "patience": ("INT", {"default": 10 ** 4, "min": 1, "max": 10 ** 6}),
                "audit_samples": ("INT", {"default": 200, "min": 0, "max": 10 ** 5}),
            },
            "hidden": _hidden(),
        }

    RETURN_TYPES = ()
    FUNCTION = "cover"
    OUTPUT_NODE = True
    CATEGORY = "tomography"

    def cover(self, num_qubits, eps, patience=10 ** 4, audit_samples=200, seed=0, unique_id=None):
        stream = node_stream(seed, unique_id)
        cs = build_covering_set(num_qubits, eps, stream.child("build"), patience=patience)
        report = {"dimension": cs.dimension, "eps": eps, "members": len(cs.members)}
        if audit_samples:
            report["audit"] = audit_covering_set(cs, audit_samples, stream.child("audit"))
        return {"report": report}


class NonAdaptiveSimulation:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {
                "verifier": ("VERIFIER",),
                "input": ("STRING", {"default": ""}),
                "c": ("FLOAT", {"default": 2.0 / 3.0, "min": 0.0, "max": 1.0}),
                "s": ("FLOAT", {"default": 1.0 / 3.0, "min": 0.0, "max": 1.0}),
                "repetition_cap": ("INT", {"default": 64, "min": 1, "max": 10 ** 6}),
            },
            "optional": {
                "proof": ("DENSITY",),
                "eta": ("INT", {"default": 0, "min": 0, "max": 64}),
                "proofs": ("INT", {"default": 10, "min": 1, "max": 1000}),
                "trials": ("INT", {"default": 0, "min": 0, "max": 10 ** 5}),
            },
            "hidden": _hidden(),
        }

    RETURN_TYPES = ("VERIFIER",)
    RETURN_NAMES = ("energy_verifier",)
    FUNCTION = "simulate"
    OUTPUT_NODE = True
    CATEGORY = "protocols"
    DESCRIPTION = "Learns a fixed Hamiltonian from the verifier and measures it with a repeated non-adaptive verifier."

    @classmethod
    def VALIDATE_INPUTS(cls, c, s):
        if not c > s:
            return f"completeness {c} must exceed soundness {s}"
        return True

    def simulate(self, verifier, input, c, s, repetition_cap, proof=None, eta=0, proofs=10, trials=0,
                 seed=0, unique_id=None):
        stream = node_stream(seed, unique_id)
        sim = nonadaptive_simulation(verifier, input, c, s, stream.child("simulate"), repetition_cap=repetition_cap,
                                     eta=eta or None)
        reference = None
        deviation = 0.0
        for i in range(proofs):
            xi = random_density_matrix(sim.kitaev.num_proof_qubits, stream.child(f"proof={i}").generator)
            dist = sim.query_distribution(xi, copies=2)
            if reference is None:
                reference = dist
                continue
            for path in set(dist) | set(reference):
                deviation = max(deviation, abs(dist.get(path, 0.0) - reference.get(path, 0.0)))
        report = {"parameters": sim.parameters.as_dict(), "query_count": sim.query_count,
                  "learned_ground_energy": ground_energy(sim.learned),
                  "query_distribution_deviation": deviation,
                  "query_distribution": _path_list(reference or {})}
        if proof is not None:
            report["copy_acceptance"] = sim.copy_acceptance(proof)
            report["acceptance"] = sim.acceptance(proof)
            if trials:
                decisions = sim.sampled_decisions(proof, trials, stream.child("trials"))
                report["trials"] = trials
                report["accepted_trials"] = sum(decisions)
        report = node_helpers.check(deviation <= IDENTITY_TOLERANCE, **report)
        return {"report": report, "result": (sim.kitaev,)}


class QCMAPipeline:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {
                "verifier": ("VERIFIER",),
                "input": ("STRING", {"default": ""}),
                "c": ("FLOAT", {"default": 2.0 / 3.0, "min": 0.0, "max": 1.0}),
                "s": ("FLOAT", {"default": 1.0 / 3.0, "min": 0.0, "max": 1.0}),
            },
            "optional": {"eta": ("INT", {"default": 0, "min": 0, "max": 64})},
            "hidden": _hidden(),
        }

    RETURN_TYPES = ()
    FUNCTION = "decide"
    OUTPUT_NODE = True
    CATEGORY = "protocols"

    @classmethod
    def VALIDATE_INPUTS(cls, c, s):
        return NonAdaptiveSimulation.VALIDATE_INPUTS(c, s)

    def decide(self, verifier, input, c, s, eta=0, seed=0, unique_id=None):
        _, report = qcma_pipeline(verifier, input, c, s, node_stream(seed, unique_id), eta=eta or None)
        return {"report": report}


class KSeparableCheck:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {
                "hamiltonian": ("HAMILTONIAN",),
                "state": ("DENSITY",),
                "a": ("FLOAT", {"default": 0.1, "min": -10.0, "max": 10.0}),
                "b": ("FLOAT", {"default": 0.5, "min": -10.0, "max": 10.0}),
                "k": ("INT", {"default": 1, "min": 1, "max": 16}),
            },
            "optional": {"witness": ("WITNESS", {"tooltip": "Omitted: the honest witness built from the state's register marginals."})},
            "hidden": _hidden(),
        }

    RETURN_TYPES = ()
    FUNCTION = "check"
    OUTPUT_NODE = True
    CATEGORY = "protocols"
    DESCRIPTION = "Classical marginals witness plus a quantum witness: state, energy and consistency checks."

    @classmethod
    def VALIDATE_INPUTS(cls, a, b):
        if not b > a:
            return f"need a < b, got a={a}, b={b}"
        return True

    def check(self, hamiltonian, state, a, b, k, witness=None, seed=0, unique_id=None):
        if witness is None:
            regs = register_qubits(hamiltonian.num_qubits, k)
            witness = honest_classical_witness(hamiltonian, [partial_trace(state, r) for r in regs], k)
        _, report = k_separable_check(hamiltonian, a, b, witness, state, node_stream(seed, unique_id), k=k)
        return {"report": report}


class QMAForQPCP:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {
                "verifier": ("VERIFIER",),
                "state": ("DENSITY",),
                "input": ("STRING", {"default": ""}),
                "c": ("FLOAT", {"default": 2.0 / 3.0, "min": 0.0, "max": 1.0}),
                "s": ("FLOAT", {"default": 1.0 / 3.0, "min": 0.0, "max": 1.0}),
            },
            "optional": {"witness": ("WITNESS",), "eta": ("INT", {"default": 0, "min": 0, "max": 64})},
            "hidden": _hidden(),
        }

    RETURN_TYPES = ()
    FUNCTION = "decide"
    OUTPUT_NODE = True
    CATEGORY = "protocols"

    @classmethod
    def VALIDATE_INPUTS(cls, c, s):
        return NonAdaptiveSimulation.VALIDATE_INPUTS(c, s)

    def decide(self, verifier, state, input, c, s, witness=None, eta=0, seed=0, unique_id=None):
        _, report = qma_for_qpcp(verifier, input, c, s, witness, state, node_stream(seed, unique_id),
                                 eta=eta or None, delta=DEFAULT_DELTA)
        return {"report": report}


class AndOfVerifiers:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {
                "verifier_a": ("VERIFIER",),
                "proof_a": ("DENSITY",),
                "verifier_b": ("VERIFIER",),
                "proof_b": ("DENSITY",),
            },
            "optional": {
                "input_a": ("STRING", {"default": ""}),
                "input_b": ("STRING", {"default": ""}),
                "joint_proof": ("DENSITY",),
            },
            "hidden": _hidden(),
        }

    RETURN_TYPES = ()
    FUNCTION = "run"
    OUTPUT_NODE = True
    CATEGORY = "protocols"

    def run(self, verifier_a, proof_a, verifier_b, proof_b, input_a="", input_b="", joint_proof=None, seed=0,
            unique_id=None):
        proof = joint_proof if joint_proof is not None else [proof_a, proof_b]
        result = and_of_verifiers([(verifier_a, input_a), (verifier_b, input_b)], proof, node_stream(seed, unique_id))
        return {"report": {"accept": result.accepted, "accept_probability": result.probability,
                           "per_verifier": result.per_verifier, "product_of_marginals": result.product,
                           "registers": [list(r) for r in result.registers]}}


class StrongErrorReduction:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {
                "verifier": ("VERIFIER",),
                "proof": ("DENSITY",),
                "input": ("STRING", {"default": ""}),
                "rounds": ("INT", {"default": 5, "min": 1, "max": 101}),
                "threshold": ("FLOAT", {"default": 0.5, "min": 0.0, "max": 1.0}),
            },
            "hidden": _hidden(),
        }

    RETURN_TYPES = ()
    FUNCTION = "reduce"
    OUTPUT_NODE = True
    CATEGORY = "protocols"
    DESCRIPTION = "Sequential runs on one proof register, uncomputing after every accepting run."

    @classmethod
    def VALIDATE_INPUTS(s, rounds, threshold):
        if threshold == 0.5 and rounds % 2 == 0:
            return "majority vote needs an odd number of rounds"
        return True

    def reduce(self, verifier, proof, input, rounds, threshold, seed=0, unique_id=None):
        result = strong_error_reduction(verifier, input, proof, rounds, node_stream(seed, unique_id), threshold=threshold)
        report = {"accept": result.accepted, "accept_probability": result.probability, "rounds": rounds,
                  "threshold": threshold, "round_probabilities": result.round_probabilities,
                  "count_distribution": result.count_distribution, "disturbance": result.disturbance,
                  "gentle_measurement": gentle_measurement_check(verifier, input, proof)}
        return {"report": report}


class GenerateFixture:
    @classmethod
    def INPUT_TYPES(s):
        return {
            "required": {
                "family": (list(fixtures.FAMILIES),),
                "params": ("STRING", {"default": "", "tooltip": "Comma separated key=value integers."}),
                "directory": ("STRING", {"default": "fixtures", "tooltip": "Absolute path, or a directory under the output directory."}),
            },
            "hidden": _hidden(),
        }

    RETURN_TYPES = ()
    FUNCTION = "generate"
    OUTPUT_NODE = True
    CATEGORY = "fixtures"

    @classmethod
    def VALIDATE_INPUTS(s, params):
        try:
            parse_params(params)
        except ValueError as e:
            return str(e)
        return True

    def generate(self, family, params, directory, seed=0, unique_id=None):
        files = fixtures.generate_fixture(family, parse_params(params), node_stream(seed, unique_id))
        written = {}
        for name, obj in sorted(files.items()):
            _write(os.path.join(directory, name), obj)
            written[name] = node_helpers.body_digest(obj)
        return {"report": {"family": family, "params": parse_params(params), "files": written}}


def parse_params(text: str) -> dict:
    params = {}
    for item in filter(None, (p.strip() for p in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"parameter '{item}' is not key=value")
        try:
            params[key.strip()] = int(value)
        except ValueError:
            raise ValueError(f"parameter '{item}' needs an integer value")
    return params


NODE_CLASS_MAPPINGS = {
    "LoadVerifier": LoadVerifier,
    "LoadProof": LoadProof,
    "LoadHamiltonian": LoadHamiltonian,
    "LoadMarginalSpec": LoadMarginalSpec,
    "LoadWitness": LoadWitness,
    "FixtureVerifier": FixtureVerifier,
    "RandomProof": RandomProof,
    "BasisProof": BasisProof,
    "RandomHamiltonian": RandomHamiltonian,
    "AcceptanceProbability": AcceptanceProbability,
    "ExactHamiltonian": ExactHamiltonian,
    "LearnHamiltonian": LearnHamiltonian,
    "EnergyIdentityCheck": EnergyIdentityCheck,
    "CompareHamiltonians": CompareHamiltonians,
    "SmoothHamiltonian": SmoothHamiltonian,
    "KitaevVerifier": KitaevVerifier,
    "SampleTerms": SampleTerms,
    "GroundEnergy": GroundEnergy,
    "WeightedErrorCheck": WeightedErrorCheck,
    "SaveHamiltonian": SaveHamiltonian,
    "SaveVerifier": SaveVerifier,
    "EstimateMarginals": EstimateMarginals,
    "CLDMDecide": CLDMDecide,
    "CoveringSet": CoveringSet,
    "NonAdaptiveSimulation": NonAdaptiveSimulation,
    "QCMAPipeline": QCMAPipeline,
    "KSeparableCheck": KSeparableCheck,
    "QMAForQPCP": QMAForQPCP,
    "AndOfVerifiers": AndOfVerifiers,
    "StrongErrorReduction": StrongErrorReduction,
    "GenerateFixture": GenerateFixture,
}

NODE_DISPLAY_NAME_MAPPINGS = {
    "LoadVerifier": "Load Verifier Spec",
    "LoadProof": "Load Proof State",
    "LoadHamiltonian": "Load Hamiltonian",
    "LoadMarginalSpec": "Load Marginal Spec",
    "LoadWitness": "Load Classical Witness",
    "FixtureVerifier": "Fixture Verifier",
    "RandomProof": "Random Proof",
    "BasisProof": "Basis Proof",
    "RandomHamiltonian": "Random PSD Hamiltonian",
    "AcceptanceProbability": "Acceptance Probability",
    "ExactHamiltonian": "Exact Hamiltonian",
    "LearnHamiltonian": "Learn Hamiltonian",
    "EnergyIdentityCheck": "Energy Identity Check",
    "CompareHamiltonians": "Compare Hamiltonians",
    "SmoothHamiltonian": "Smooth Hamiltonian",
    "KitaevVerifier": "Energy Estimation Verifier",
    "SampleTerms": "Sample Terms",
    "GroundEnergy": "Ground Energy",
    "WeightedErrorCheck": "Weighted Error Check",
    "SaveHamiltonian": "Save Hamiltonian",
    "SaveVerifier": "Save Verifier",
    "EstimateMarginals": "Estimate Marginals",
    "CLDMDecide": "Consistency Decision",
    "CoveringSet": "Covering Set",
    "NonAdaptiveSimulation": "Non-Adaptive Simulation",
    "QCMAPipeline": "QCMA Pipeline",
    "KSeparableCheck": "k-Separable Check",
    "QMAForQPCP": "QMA Protocol",
    "AndOfVerifiers": "AND of Verifiers",
    "StrongErrorReduction": "Strong Error Reduction",
    "GenerateFixture": "Generate Fixture",
}
