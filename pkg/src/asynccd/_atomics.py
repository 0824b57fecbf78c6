"""Word-sized atomic primitives for numba kernels.

numba exposes no CPU atomics, so these lower directly to LLVM ``atomicrmw``,
``cmpxchg`` and atomic load/store instructions on a 1-d array element.
"""
from __future__ import annotations

from llvmlite import ir
from numba import types
from numba.core import cgutils
from numba.extending import intrinsic


def _ptr(context, builder, aryty, ary, idx):
    a = context.make_array(aryty)(context, builder, ary)
    return cgutils.get_item_pointer(context, builder, aryty, a, [idx])


@intrinsic
def fetch_add_f64(typingctx, arr, idx, val):
    """x[i] += v atomically; returns the previous value."""
    sig = types.float64(arr, idx, types.float64)

    def codegen(context, builder, signature, args):
        ptr = _ptr(context, builder, signature.args[0], args[0], args[1])
        return builder.atomic_rmw("fadd", ptr, args[2], "monotonic")

    return sig, codegen


@intrinsic
def fetch_add_i64(typingctx, arr, idx, val):
    sig = types.int64(arr, idx, types.int64)

    def codegen(context, builder, signature, args):
        ptr = _ptr(context, builder, signature.args[0], args[0], args[1])
        return builder.atomic_rmw("add", ptr, args[2], "seq_cst")

    return sig, codegen


@intrinsic
def load_f64(typingctx, arr, idx):
    sig = types.float64(arr, idx)

    def codegen(context, builder, signature, args):
        ptr = _ptr(context, builder, signature.args[0], args[0], args[1])
        return builder.load_atomic(ptr, "monotonic", 8)

    return sig, codegen


@intrinsic
def store_f64(typingctx, arr, idx, val):
    sig = types.void(arr, idx, types.float64)

    def codegen(context, builder, signature, args):
        ptr = _ptr(context, builder, signature.args[0], args[0], args[1])
        builder.store_atomic(args[2], ptr, "monotonic", 8)
        return context.get_dummy_value()

    return sig, codegen


@intrinsic
def load_i64(typingctx, arr, idx):
    sig = types.int64(arr, idx)

    def codegen(context, builder, signature, args):
        ptr = _ptr(context, builder, signature.args[0], args[0], args[1])
        return builder.load_atomic(ptr, "acquire", 8)

    return sig, codegen


@intrinsic
def try_lock(typingctx, arr, idx):
    """Compare-and-swap 0 -> 1 with acquire ordering."""
    sig = types.boolean(arr, idx)

    def codegen(context, builder, signature, args):
        ptr = _ptr(context, builder, signature.args[0], args[0], args[1])
        zero = context.get_constant(types.int64, 0)
        one = context.get_constant(types.int64, 1)
        res = builder.cmpxchg(ptr, zero, one, "acquire", "monotonic")
        return builder.extract_value(res, 1)

    return sig, codegen


@intrinsic
def unlock(typingctx, arr, idx):
    sig = types.void(arr, idx)

    def codegen(context, builder, signature, args):
        ptr = _ptr(context, builder, signature.args[0], args[0], args[1])
        zero = context.get_constant(types.int64, 0)
        builder.store_atomic(zero, ptr, "release", 8)
        return context.get_dummy_value()

    return sig, codegen


@intrinsic
def sched_yield(typingctx):
    """libc sched_yield, called directly so the kernel stays cacheable."""
    sig = types.int32()

    def codegen(context, builder, signature, args):
        fnty = ir.FunctionType(ir.IntType(32), [])
        fn = cgutils.get_or_insert_function(builder.module, fnty, "sched_yield")
        return builder.call(fn, [])

    return sig, codegen


@intrinsic
def usleep(typingctx, us):
    """libc usleep on an integer number of microseconds."""
    sig = types.int32(us)

    def codegen(context, builder, signature, args):
        fnty = ir.FunctionType(ir.IntType(32), [ir.IntType(32)])
        fn = cgutils.get_or_insert_function(builder.module, fnty, "usleep")
        arg = builder.trunc(args[0], ir.IntType(32)) if args[0].type.width > 32 else args[0]
        return builder.call(fn, [arg])

    return sig, codegen
