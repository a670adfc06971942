#pragma once

namespace lpa::kern {

enum class Isa { scalar = 0, avx2 = 1 };

// Best instruction set supported by the running CPU and compiled into this
// binary.
Isa detect_isa();

// Currently selected instruction set. Defaults to detect_isa(); honours the
// LPA_ISA environment variable ("scalar" or "avx2") on first use.
Isa active_isa();

// Select a kernel set at runtime. Requests above detect_isa() are clamped.
void force_isa(Isa isa);

const char* isa_name(Isa isa);

}  // namespace lpa::kern
