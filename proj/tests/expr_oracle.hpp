#pragma once

/* Random expression generator and truth-table evaluation for BDD checks. */

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <fluxsynth/bool_expr.hpp>

namespace fluxsynth::test
{

inline bool_expr random_expr( std::mt19937& rng, std::vector<std::string> const& vars, int depth )
{
  std::uniform_int_distribution<int> op( 0, depth <= 0 ? 0 : 4 );
  switch ( op( rng ) )
  {
  case 0:
  {
    auto const v = bool_expr::variable( vars[rng() % vars.size()] );
    return rng() % 2 ? v : !v;
  }
  case 1:
    return random_expr( rng, vars, depth - 1 ) & random_expr( rng, vars, depth - 1 );
  case 2:
    return random_expr( rng, vars, depth - 1 ) | random_expr( rng, vars, depth - 1 );
  case 3:
    return random_expr( rng, vars, depth - 1 ) ^ random_expr( rng, vars, depth - 1 );
  default:
    return !random_expr( rng, vars, depth - 1 );
  }
}

inline std::vector<bool> truth_table( bool_expr const& e, std::vector<std::string> const& vars )
{
  std::vector<bool> tt( std::size_t{ 1 } << vars.size() );
  for ( uint32_t m = 0; m < tt.size(); ++m )
    tt[m] = e.evaluate( [&]( std::string const& n ) {
      for ( uint32_t i = 0; i < vars.size(); ++i )
        if ( vars[i] == n )
          return static_cast<bool>( ( m >> i ) & 1u );
      throw std::logic_error( "unknown variable " + n );
    } );
  return tt;
}

inline std::vector<std::string> var_names( uint32_t n )
{
  std::vector<std::string> v;
  for ( uint32_t i = 0; i < n; ++i )
    v.push_back( "x" + std::to_string( i ) );
  return v;
}

/* minterm-by-minterm disjunction realizing `on` */
inline bool_expr minterm_sop( std::vector<bool> const& on, std::vector<std::string> const& vars )
{
  std::vector<bool_expr> terms;
  for ( uint32_t m = 0; m < on.size(); ++m )
    if ( on[m] )
    {
      std::vector<bool_expr> lits;
      for ( uint32_t v = 0; v < vars.size(); ++v )
        lits.push_back( ( m >> v ) & 1u ? bool_expr::variable( vars[v] ) : !bool_expr::variable( vars[v] ) );
      terms.push_back( bool_expr::conjunction( lits ) );
    }
  return bool_expr::disjunction( terms );
}

inline std::size_t cube_count( bool_expr const& sop )
{
  return sop.type() == bool_expr::kind::or_ ? sop.children().size() : sop.type() == bool_expr::kind::zero ? 0u : 1u;
}

} // namespace fluxsynth::test
