"""Exception hierarchy shared across the package."""


class SiteCrewError(Exception):
    """Base class for all package errors."""


class WireError(SiteCrewError):
    """Endpoint unreachable, timed out, or returned a malformed payload."""


class ModalityError(SiteCrewError):
    """Image attachments sent to a text-only model."""


class EmptyResponse(SiteCrewError):
    """Model returned no text after the single permitted retry."""


class InvalidModality(SiteCrewError):
    """Topology construction received models with swapped modalities."""


class MissingContext(SiteCrewError):
    """A task's context references an upstream output that is absent."""


class PipelineError(SiteCrewError):
    """Backend failure during pipeline execution, annotated with the task id."""

    def __init__(self, task_id: str, cause: Exception):
        super().__init__(f"task {task_id!r}: {cause}")
        self.task_id = task_id
        self.cause = cause


class SchemaError(SiteCrewError):
    """A data file does not satisfy its schema; message carries the field path."""


class CyclicPrecedence(SiteCrewError):
    """The scenario's precedence constraint set contains a cycle."""


# Cyclic constraint sets are rejected at scenario load.
MalformedDag = CyclicPrecedence


class UnpricedModel(SiteCrewError):
    """Cost computation encountered a model id absent from the price table."""


class OutOfRange(SiteCrewError):
    """Normalization input falls outside [x_min, x_max]."""


class JudgeFamilyConflict(SiteCrewError):
    """Judge model shares a family with one of the pipeline models."""


class JudgeParseError(SiteCrewError):
    """Judge output could not be parsed after the single permitted retry."""
