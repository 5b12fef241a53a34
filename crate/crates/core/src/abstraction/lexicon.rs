//! Names that survive abstraction verbatim.
//!
//! These carry the optimization signal (which API got swapped for which), so
//! they are never turned into placeholders unless the unit itself binds them.

use super::Language;

const PYTHON_BUILTINS: &[&str] = &[
    // builtins module
    "abs", "aiter", "all", "anext", "any", "ascii", "bin", "bool", "breakpoint", "bytearray",
    "bytes", "callable", "chr", "classmethod", "compile", "complex", "delattr", "dict", "dir",
    "divmod", "enumerate", "eval", "exec", "exit", "filter", "float", "format", "frozenset",
    "getattr", "globals", "hasattr", "hash", "help", "hex", "id", "input", "int", "isinstance",
    "issubclass", "iter", "len", "list", "locals", "map", "max", "memoryview", "min", "next",
    "object", "oct", "open", "ord", "pow", "print", "property", "quit", "range", "repr",
    "reversed", "round", "set", "setattr", "slice", "sorted", "staticmethod", "str", "sum",
    "super", "tuple", "type", "vars", "zip", "__import__", "NotImplemented", "Ellipsis",
    // exceptions
    "BaseException", "Exception", "ArithmeticError", "AssertionError", "AttributeError",
    "EOFError", "IndexError", "KeyError", "KeyboardInterrupt", "MemoryError", "NameError",
    "NotImplementedError", "OSError", "OverflowError", "RecursionError", "RuntimeError",
    "StopIteration", "SystemExit", "TypeError", "ValueError", "ZeroDivisionError",
    // stdlib modules commonly used without an explicit import being visible
    "sys", "math", "collections", "itertools", "functools", "heapq", "bisect", "re", "os",
    "string", "operator", "array", "decimal", "fractions", "random", "statistics", "copy",
    "numpy", "np",
];

const CPP_KEYWORDS: &[&str] = &[
    "alignas", "alignof", "and", "and_eq", "asm", "auto", "bitand", "bitor", "bool", "break",
    "case", "catch", "char", "char16_t", "char32_t", "class", "compl", "const", "constexpr",
    "const_cast", "continue", "decltype", "default", "delete", "do", "double", "dynamic_cast",
    "else", "enum", "explicit", "export", "extern", "false", "float", "for", "friend", "goto",
    "if", "inline", "int", "long", "mutable", "namespace", "new", "noexcept", "not", "not_eq",
    "nullptr", "operator", "or", "or_eq", "private", "protected", "public", "register",
    "reinterpret_cast", "return", "short", "signed", "sizeof", "static", "static_assert",
    "static_cast", "struct", "switch", "template", "this", "throw", "true", "try", "typedef",
    "typeid", "typename", "union", "unsigned", "using", "virtual", "void", "volatile",
    "wchar_t", "while", "xor", "xor_eq", "size_t", "int64_t", "uint64_t", "int32_t",
    "uint32_t",
];

const CPP_STD_NAMES: &[&str] = &[
    "std", "main", "cin", "cout", "cerr", "clog", "endl", "ios", "ios_base", "printf", "scanf",
    "puts", "gets", "getchar", "putchar", "fgets", "fputs", "sprintf", "fprintf", "stdin",
    "stdout", "stderr", "getline", "max", "min", "swap", "sort", "stable_sort", "reverse",
    "abs", "llabs", "fabs", "sqrt", "cbrt", "pow", "exp", "log", "log2", "log10", "floor",
    "ceil", "round", "memset", "memcpy", "strlen", "strcmp", "strcpy", "fill", "fill_n",
    "accumulate", "lower_bound", "upper_bound", "binary_search", "unique", "gcd", "__gcd", "lcm",
    "make_pair", "make_tuple", "tie", "to_string", "stoi", "stol", "stoll", "atoi", "atol",
    "atoll", "begin", "end", "exit", "malloc", "calloc", "free", "assert", "INT_MAX",
    "INT_MIN", "LLONG_MAX", "LLONG_MIN", "LONG_MAX", "LONG_MIN", "UINT_MAX", "EOF", "NULL",
    "fixed", "setprecision", "setw", "setfill", "next_permutation", "prev_permutation",
    "count", "count_if", "find", "find_if", "max_element", "min_element", "iota", "greater",
    "less", "move", "distance", "advance", "bitset", "vector", "string", "map", "set",
    "unordered_map", "unordered_set", "multiset", "multimap", "pair", "tuple", "queue",
    "deque", "stack", "priority_queue", "array", "list", "numeric_limits", "isdigit",
    "isalpha", "isupper", "islower", "toupper", "tolower", "__builtin_popcount",
    "__builtin_popcountll", "__builtin_clz", "__builtin_ctz",
];

/// Whether `name` is kept verbatim when it is not bound inside the unit.
pub fn is_preserved(language: Language, name: &str) -> bool {
    match language {
        Language::Python => {
            PYTHON_BUILTINS.contains(&name) || (name.starts_with("__") && name.ends_with("__"))
        }
        Language::Cpp => CPP_KEYWORDS.contains(&name) || CPP_STD_NAMES.contains(&name),
    }
}

/// Names that are never user-renameable even when the unit defines them.
pub fn is_reserved(language: Language, name: &str) -> bool {
    match language {
        Language::Python => name.starts_with("__") && name.ends_with("__"),
        Language::Cpp => name == "main" || CPP_KEYWORDS.contains(&name),
    }
}
