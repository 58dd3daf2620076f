#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "transnet/formats.hpp"

namespace transnet {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

/// Wraps a raw RGB24 byte stream as frames. Throws DataError for an empty
/// stream or a trailing partial frame.
Video frames_from_stream(std::span<const std::uint8_t> stream, int width, int height);

/// Runs `command` through the shell and collects its standard output.
/// "{input}" in the command is replaced by the quoted input path; without
/// the placeholder the path is appended. Throws DataError on a nonzero exit.
std::vector<std::uint8_t> run_decoder(const std::string& command, const std::string& input);

/// Entry point for the `transnet` tool: ingest, synth, train, detect, eval,
/// sweep and info subcommands. Returns one of the ExitCode values.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace transnet
