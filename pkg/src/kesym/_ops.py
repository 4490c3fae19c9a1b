"""Instruction-tape opcode numbering shared by both evaluation backends.

A tape is a flat int32 array of (opcode, operand) pairs plus a float64
constant pool.  Operands: constant-pool index for CONST, point index for VAR,
signed small exponent for POWI, 0 (unused) otherwise.  The compiled kernel
mirrors these values; test_backend checks the two stay in sync.
"""

OP_CONST = 0
OP_VAR = 1
OP_ADD = 2
OP_MUL = 3
OP_POW = 4
OP_POWI = 5
OP_SQRT = 6
OP_SIN = 7
OP_COS = 8
OP_EXP = 9
OP_LOG = 10

MAX_STACK = 128          # compile-time depth bound enforced in numeric.compile_tape
MAX_POWI = 64            # |exponent| above this compiles to CONST+POW

# Integrator completion status codes.
ST_OK = 0
ST_SINGULAR = 1
ST_MAX_STEPS = 2
ST_STEP_UNDERFLOW = 3
