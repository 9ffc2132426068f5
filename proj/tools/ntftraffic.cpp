#include <iostream>

#include "ntftraffic/cli.hpp"

int main(int argc, char** argv) {
  using namespace ntftraffic::cli;
  RunConfig config;
  try {
    config = parse_args(argc, argv);
  } catch (const HelpRequested& help) {
    std::cerr << help.what();
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "ntftraffic: " << e.what() << '\n';
    return 2;
  }
  try {
    run(config);
  } catch (const UsageError& e) {
    std::cerr << "ntftraffic " << config.subcommand << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ntftraffic " << config.subcommand << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
