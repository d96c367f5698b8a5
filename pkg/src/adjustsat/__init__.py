"""Toolkit for loudness-normalized dialogue-enhancement stimuli, the
adjustment/satisfaction listening test, and its box-plot analysis."""

__version__ = "0.1.0"

from .loudness import (
    AudioClip,
    LoudnessReading,
    apply_gain,
    gain_to_target,
    integrated_loudness,
)
from .stimulus import (
    ItemSpec,
    LdGrid,
    LeakageModel,
    StemPair,
    VersionSet,
    compute_ld,
    max_achievable_ld,
    parse_grid,
    render_version,
    render_version_set,
    simulate_ds,
)
from .session import (
    Playlist,
    SessionEvent,
    SessionState,
    TrialResult,
    current_trial_view,
    finalize,
    handle_event,
    replay,
    start_session,
)
from .analysis import (
    Audiogram,
    BoxStats,
    QuestionnaireResponse,
    aggregate,
    audiogram_summary,
    box_stats,
    export_plot_data,
    questionnaire_tally,
    validity_filter,
)
