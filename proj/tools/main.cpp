#include "microtrap/cli/app.hpp"

int main(int argc, char** argv)
{
    return microtrap::cli::run(argc, argv);
}
