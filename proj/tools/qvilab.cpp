#include <qvilab/cli.hpp>

int main(int argc, char** argv) {
    return qvi::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
