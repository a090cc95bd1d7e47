"""Declarative rule-program IR: three constraint layers in one step list.

Top layer: the ordered step sequence itself (EmitFixed scaffolding).
Middle layer: Branch and ValidateLoop nodes (conditional logic, check and
regenerate). Bottom layer: Gen/Select constraint payloads compiled to token
automata at run time.
"""

from scidc.rule_ir.ast import (
    Branch,
    BranchArm,
    DynamicOptions,
    EmitFixed,
    Finding,
    Gen,
    RuleProgram,
    Select,
    Step,
    ValidateLoop,
    all_steps,
    iter_steps,
)
from scidc.rule_ir.lint import errors_only, lint_program
from scidc.rule_ir.parser import parse_program
from scidc.rule_ir.predicate import Predicate, numeric_value, parse_predicate
from scidc.rule_ir.serializer import serialize_program

__all__ = [
    "Branch",
    "BranchArm",
    "DynamicOptions",
    "EmitFixed",
    "Finding",
    "Gen",
    "Predicate",
    "RuleProgram",
    "Select",
    "Step",
    "ValidateLoop",
    "all_steps",
    "errors_only",
    "iter_steps",
    "lint_program",
    "numeric_value",
    "parse_predicate",
    "parse_program",
    "serialize_program",
]
