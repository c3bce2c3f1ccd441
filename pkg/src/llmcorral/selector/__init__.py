from .omd import CorralStrategy, corral_update, importance_weighted_loss, lambda_residual, solve_lambda
from .schedules import DecaySchedule, ScheduleParams, expected_llm_calls, schedule_prob
from .smoothing import (
    BudgetState,
    allocate_group,
    apply_budget,
    budget_gate,
    sample_index,
    set_group_totals,
    smooth,
    smooth_clip,
    smooth_mix,
)
from .orchestrator import DecisionMaker, Pick, RngStreams
