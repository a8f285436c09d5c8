#include <iostream>
#include <string>
#include <vector>

#include "rec/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty() || args[0] == "--help" || args[0] == "-h") {
        std::cout << rec::usage();
        return args.empty() ? 2 : 0;
    }
    try {
        auto parsed = rec::parse_cli(args);
        return rec::dispatch(parsed.command, parsed.config);
    } catch (const rec::RecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
