#pragma once

namespace mtvgp {

/// Entry point of the `mtvgp` command: simulate | fit | predict | evaluate |
/// replicate-study. Errors produce a nonzero status and a JSON object
/// {"error": {"type", "message"}} on stderr.
int run_cli(int argc, char** argv);

}  // namespace mtvgp
