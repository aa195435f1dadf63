"""Confounded tumour-growth simulator with ground-truth counterfactuals."""
from .dynamics import (
    D_MAX,
    DEATH_VOLUME,
    K_OPTIONS,
    RECOVERY_VOLUME,
    SimulationDomainError,
    TreatmentVector,
    assign_treatment,
    diameter_from_volume,
    mean_recent_diameter,
    step_volume,
    treatment_probabilities,
    update_chemo_concentration,
    volume_from_diameter,
)
from .kernel import BACKEND
from .priors import ConfigError, PatientParams, default_priors, point_mass_priors, sample_patient_params
from .simulate import (
    Dataset,
    PatientTrajectory,
    SimConfig,
    annotate_counterfactuals_decoder,
    annotate_counterfactuals_encoder,
    dataset_hash,
    decoder_plans,
    eligible_starts,
    generate_dataset,
    load_manifest,
    load_records,
    save_dataset,
    simulate_trajectory,
)
