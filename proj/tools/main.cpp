#include "dakit/cli.hpp"

int main(int argc, char ** argv) {
    return dakit::cli::run({argv + 1, argv + argc});
}
