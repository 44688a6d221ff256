from __future__ import annotations

from typing import List, Tuple

import src.ir.module as im
import src.ir.vocab as vo

"""Debug printer emitting valid subset syntax. Whatever it writes parses back to a structurally equal module;
metadata, comdats and other skipped constructs are not reproduced."""


def _typed(values) -> str:
    return ', '.join(im.typed_text(value) for value in values)


def _alignment(inst: im.Instruction) -> str:
    return f', align {inst.alignment}' if inst.alignment is not None else ''


def _split_memory_flags(flags: List[str], leading: Tuple[str, ...]) -> Tuple[List[str], List[str]]:
    head = [flag for flag in flags if flag in leading]
    return head, [flag for flag in flags if flag not in leading]


def print_instruction(inst: im.Instruction) -> str:
    """One instruction in textual form, without indentation"""
    op, flags, ops = inst.opcode, list(inst.flags), inst.operands
    name = op.value
    if op is vo.Opcode.RET:
        body = f'ret {im.typed_text(ops[0])}' if ops else 'ret void'
    elif op is vo.Opcode.BR:
        targets = ', '.join(f'label {im.spell("%", label)}' for label in inst.successors)
        body = f'br {im.typed_text(ops[0])}, {targets}' if ops else f'br {targets}'
    elif op is vo.Opcode.SWITCH:
        cases = ''.join(f'    {im.typed_text(case)}, label {im.spell("%", label)}\n'
                        for case, label in zip(ops[1:], inst.successors[1:]))
        body = f'switch {im.typed_text(ops[0])}, label {im.spell("%", inst.successors[0])} [\n{cases}  ]'
    elif op is vo.Opcode.UNREACHABLE:
        body = 'unreachable'
    elif op in vo.BINARY_OPS or op in (vo.Opcode.ICMP, vo.Opcode.FCMP):
        body = ' '.join([name] + flags + [str(ops[0].type)]) + f' {im.bare_text(ops[0])}, {im.bare_text(ops[1])}'
    elif op is vo.Opcode.FNEG or op is vo.Opcode.FREEZE:
        body = ' '.join([name] + flags + [im.typed_text(ops[0])])
    elif op is vo.Opcode.ALLOCA:
        space = inst.result_type.address_space
        body = ' '.join([name] + flags + [str(inst.type_args[0])])
        body += ''.join(f', {im.typed_text(count)}' for count in ops) + _alignment(inst)
        body += f', addrspace({space})' if space else ''
    elif op is vo.Opcode.LOAD:
        head, tail = _split_memory_flags(flags, ('atomic', 'volatile'))
        body = ' '.join([name] + head + [f'{inst.type_args[0]},', im.typed_text(ops[0])] + tail)
        body += _alignment(inst)
    elif op is vo.Opcode.STORE:
        head, tail = _split_memory_flags(flags, ('atomic', 'volatile'))
        body = ' '.join([name] + head + [f'{im.typed_text(ops[0])},', im.typed_text(ops[1])] + tail)
        body += _alignment(inst)
    elif op is vo.Opcode.GETELEMENTPTR:
        body = ' '.join([name] + flags + [f'{inst.type_args[0]},', _typed(ops)])
    elif op is vo.Opcode.FENCE:
        body = ' '.join([name] + flags)
    elif op is vo.Opcode.CMPXCHG:
        head, tail = _split_memory_flags(flags, ('weak', 'volatile'))
        body = ' '.join([name] + head + [_typed(ops)] + tail) + _alignment(inst)
    elif op is vo.Opcode.ATOMICRMW:
        head = flags[:1] if flags[:1] == ['volatile'] else []
        operation, tail = flags[len(head)], flags[len(head) + 1:]
        body = ' '.join([name] + head + [operation, _typed(ops)] + tail) + _alignment(inst)
    elif op in vo.CAST_OPS:
        body = f'{name} {im.typed_text(ops[0])} to {inst.result_type}'
    elif op is vo.Opcode.PHI:
        incoming = ', '.join(f'[ {im.bare_text(value)}, {im.spell("%", label)} ]'
                             for value, label in zip(ops, inst.incoming))
        body = ' '.join([name] + flags + [str(inst.result_type), incoming])
    elif op is vo.Opcode.SELECT:
        body = ' '.join([name] + flags + [_typed(ops)])
    elif op is vo.Opcode.CALL:
        marker = [flag for flag in flags if flag in ('tail', 'musttail', 'notail')]
        rest = [flag for flag in flags if flag not in marker]
        callee_type = inst.type_args[0] if inst.type_args else inst.result_type
        body = ' '.join(marker + [name] + rest + [str(callee_type), im.bare_text(ops[0])])
        body += f'({_typed(ops[1:])})'
    elif op is vo.Opcode.VA_ARG:
        body = f'{name} {im.typed_text(ops[0])}, {inst.result_type}'
    elif op in (vo.Opcode.EXTRACTVALUE, vo.Opcode.INSERTVALUE):
        body = f'{name} {_typed(ops)}, ' + ', '.join(str(index) for index in inst.indices)
    else:
        body = f'{name} {_typed(ops)}'
    return f'{inst.result.id} = {body}' if inst.result is not None else body


def _attributes(attrs: im.AttributeSet) -> List[str]:
    return list(attrs.raw)


def print_global(value: im.GlobalValue) -> str:
    parts = [im.spell('@', value.name), '=']
    if value.initializer is None or value.linkage is not vo.Linkage.EXTERNAL:
        parts.append(value.linkage.value)
    parts += [token for token in (value.preemption, value.visibility.value if value.visibility else None) if token]
    if value.thread_local:
        parts.append('thread_local')
    if value.unnamed_addr:
        parts.append(value.unnamed_addr)
    if value.address_space:
        parts.append(f'addrspace({value.address_space})')
    parts += ['constant' if value.is_constant else 'global', str(value.value_type)]
    if value.initializer is not None:
        parts.append(im.bare_text(value.initializer))
    text = ' '.join(parts)
    if value.section is not None:
        text += f', section "{value.section}"'
    if value.alignment is not None:
        text += f', align {value.alignment}'
    return text


def print_function(function: im.Function) -> str:
    parts = ['declare' if function.is_declaration else 'define']
    if function.linkage is not vo.Linkage.EXTERNAL:
        parts.append(function.linkage.value)
    parts += [token for token in (function.preemption, function.visibility.value if function.visibility else None)
              if token]
    if function.calling_convention is not vo.CallingConv.C:
        parts.append(function.calling_convention.value)
    parts += _attributes(function.return_attributes)
    params = [' '.join([str(arg.type)] + _attributes(attrs) + [arg.id])
              for arg, attrs in zip(function.args, function.arg_attributes)]
    if function.vararg:
        params.append('...')
    parts.append(f'{function.return_type} {im.spell("@", function.name)}({", ".join(params)})')
    if function.unnamed_addr:
        parts.append(function.unnamed_addr)
    parts += _attributes(function.attributes)
    if function.section is not None:
        parts.append(f'section "{function.section}"')
    if function.alignment is not None:
        parts.append(f'align {function.alignment}')
    header = ' '.join(parts)
    if function.is_declaration:
        return header
    lines = [header + ' {']
    for block in function.blocks:
        lines.append(f'{im.spell("", block.label)}:')
        lines += [f'  {print_instruction(inst)}' for inst in block.instructions]
    lines.append('}')
    return '\n'.join(lines)


def _type_body(desc: im.TypeDesc) -> str:
    return 'opaque' if desc.kind is im.TypeKind.OPAQUE else im.struct_body(desc)


def print_module(module: im.IrModule) -> str:
    """Renders a module as LLVM IR text
    :param module: module to print
    :return: IR text ending in a newline
    """
    sections: List[List[str]] = [[f'; ModuleID = \'{module.name}\'']]
    header = []
    if module.datalayout is not None:
        header.append(f'target datalayout = "{module.datalayout}"')
    if module.target_triple is not None:
        header.append(f'target triple = "{module.target_triple}"')
    sections.append(header)
    sections.append([f'{im.spell("%", name)} = type {_type_body(desc)}' for name, desc in module.named_types])
    sections.append([print_global(value) for value in module.globals])
    sections += [[print_function(function)] for function in module.functions]
    return '\n\n'.join('\n'.join(section) for section in sections if section) + '\n'
