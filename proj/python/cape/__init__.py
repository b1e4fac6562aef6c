"""Personality-consistency metrics for chat-model questionnaire runs."""

from ._cape import (
    Error,
    Inventory,
    TestResult,
    anova_oneway,
    consistency_report,
    cronbach_alpha,
    ed,
    fit_gpr,
    load_inventory,
    log_marginal_likelihood,
    oc,
    pearson,
    read_transcripts,
    run_cli,
    spearman,
    student_t,
    tar,
    tc,
    union_width,
    welch_t,
    wilcoxon,
)

__all__ = [
    "Error",
    "Inventory",
    "TestResult",
    "anova_oneway",
    "consistency_report",
    "cronbach_alpha",
    "ed",
    "fit_gpr",
    "load_inventory",
    "log_marginal_likelihood",
    "oc",
    "pearson",
    "read_transcripts",
    "run_cli",
    "spearman",
    "student_t",
    "tar",
    "tc",
    "union_width",
    "welch_t",
    "wilcoxon",
]
