#pragma once

#include <predq/estimate.hpp>
#include <predq/graph.hpp>
#include <predq/io.hpp>
#include <predq/linalg.hpp>
#include <predq/model.hpp>
#include <predq/prcheck.hpp>
#include <predq/quality.hpp>
#include <predq/rational.hpp>
#include <predq/report.hpp>
#include <predq/solve.hpp>
#include <predq/transform.hpp>
