from .backends import (BackendError, FixtureMissError, LlmBackend, RateLimitError, TransportError,
                       complete, prompt_hash)
from .evaluation import (EvalConfig, EvalReport, RunOutcome, WorkflowInputs, run_evaluation,
                         run_once)
from .extract import (AgentResult, AmbiguousArtifactError, ArtifactSchemaError, ExtractionError,
                      NoArtifactError, NoExecuteMethodError, check_execute_signature,
                      extract_artifact)
from .prompts import MissingSlotError, build_prompt, load_prompt
