#include "app.hpp"

int main(int argc, char** argv)
{
    return marketstates::app::run(argc, argv);
}
