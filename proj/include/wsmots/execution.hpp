#pragma once

namespace wsmots {

/// Selects the serial reference kernel or its OpenMP counterpart. Both
/// produce identical results; the serial path exists for testing.
enum class Execution { Serial, Parallel };

}  // namespace wsmots
