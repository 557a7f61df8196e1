#include <catch_amalgamated.hpp>

#include <fluxsynth/pdk.hpp>
#include <fluxsynth/synth.hpp>

#include "test_util.hpp"

using namespace fluxsynth;

namespace
{

pdk const& sample()
{
  static pdk const lib = load_pdk( test::data_path( "pdk/sample.json" ) );
  return lib;
}

finite_state_machine golden( std::string const& file ) { return read_fsm_file( test::data_path( "fsm/" + file ) ); }

} // namespace

TEST_CASE( "golden machines synthesize deterministically", "[synth]" )
{
  for ( auto const& [file, gates] : { std::pair{ "erdff.fsm", 2u }, std::pair{ "feedback.fsm", 3u }, std::pair{ "counter2.fsm", 6u } } )
  {
    auto const fsm = golden( file );
    auto const r = synthesize( fsm, sample() );
    INFO( file );
    CHECK( r.cost.gates == gates );
    CHECK( r.encoding.ordinal == 0 );
    CHECK( r.attempts == 1 );
    CHECK( r.verdict.equivalent );
    CHECK( r.verdict.depth == 5 );
    CHECK( r.net.metadata["equivalence"] == "equivalent up to depth 5" );

    auto const text = write_netlist_json( r.net );
    for ( uint32_t jobs : { 4u, 16u } )
    {
      synth_config cfg;
      cfg.jobs = jobs;
      CHECK( write_netlist_json( synthesize( fsm, sample(), cfg ).net ) == text );
    }
    synth_config fast;
    fast.deterministic = false;
    fast.jobs = 4;
    CHECK( synthesize( fsm, sample(), fast ).verdict.equivalent );
  }
}

TEST_CASE( "single-state machine", "[synth]" )
{
  auto const fsm = parse_fsm( ".name one\n.inputs a\n.outputs o\n.states S\n.initial S\n.out S a o\n.end\n" );
  auto const r = synthesize( fsm, sample() );
  CHECK( r.attempts == 1 );
  CHECK( r.cost.gates == 0 );
  CHECK( r.net.outputs == std::vector<std::pair<std::string, std::string>>{ { "o", "a" } } );
  CHECK( r.verdict.equivalent );
}

TEST_CASE( "widening when the minimal width has no encoding", "[synth]" )
{
  /* set-only signals along a chain of four states need three nested codes beyond zero */
  auto const fsm = parse_fsm( ".name chain\n.inputs a b c\n.outputs o\n.states S0 S1 S2 S3\n.initial S0\n"
                              ".trans S0 a S1\n.trans S1 b S2\n.trans S2 a S3\n.out S3 c o\n.end\n" );
  CHECK( enumerate_encodings( fsm, 2 ).empty() );
  auto const r = synthesize( fsm, sample() );
  CHECK( r.encoding.width == 3 );
  CHECK( r.verdict.equivalent );
}

TEST_CASE( "exhaustion names the unmapped signatures", "[synth]" )
{
  /* `a` reads the bit and sets it: no cell reads before setting */
  auto const fsm = parse_fsm( ".name rs\n.inputs a\n.outputs o\n.states S0 S1\n.initial S0\n.trans S0 a S1\n.out S1 a o\n.end\n" );
  try
  {
    synthesize( fsm, sample() );
    FAIL( "expected exhaustion" );
  }
  catch ( exhaustion_error const& e )
  {
    REQUIRE_FALSE( e.common_signatures().empty() );
    CHECK( e.common_signatures()[0].first == "({set,out})" );
    CHECK_THAT( e.what(), Catch::Matchers::ContainsSubstring( "({set,out})" ) );
  }
  synth_config bad;
  bad.jobs = 0;
  CHECK_THROWS_AS( synthesize( fsm, sample(), bad ), validation_error );
}

TEST_CASE( "counter generators", "[synth][counter]" )
{
  for ( uint32_t bits = 1; bits <= 4; ++bits )
    CHECK( counter_fsm( bits ) == test::counter_fsm_text_model( bits ) );

  for ( uint32_t bits : { 2u, 4u } )
  {
    auto const r = synthesize( counter_fsm( bits ), sample() );
    CHECK( r.cost.gates == 3 * bits );
    CHECK_FALSE( has_data_cycle( r.net, sample() ) );
    auto const n = synthesize_counter( bits, sample() );
    CHECK( n.instances.size() == 3 * bits );
    CHECK( check_equivalence( counter_fsm( bits ), n, sample(), 5 ).equivalent );
  }
}

TEST_CASE( "32-bit counter counts", "[synth][counter]" )
{
  auto const n = synthesize_counter( 32, sample() );
  CHECK( report( n, sample() ).gates == 96 );
  CHECK_FALSE( has_data_cycle( n, sample() ) );
  CHECK( read_netlist_json( write_netlist_json( n ) ) == n );

  std::vector<pulse_event> stim;
  for ( int64_t k = 0; k < 300; ++k )
  {
    stim.push_back( { 2 * k, "Din" } );
    stim.push_back( { 2 * k + 1, "Clk" } );
  }
  auto const t = simulate( n, sample(), stim, 600 );
  std::vector<pulse_event> expected;
  for ( int64_t k = 0; k < 300; ++k )
    for ( uint32_t b = 0; b < 32; ++b )
      if ( ( ( k + 1 ) >> b ) & 1 )
        expected.push_back( { 2 * k + 1, fmt::format( "Out{}", b + 1 ) } );
  CHECK( t.outputs == expected );
}

TEST_CASE( "splitter post-pass keeps behavior and gate count", "[synth][splitters]" )
{
  synth_config cfg;
  cfg.splitters = 2;
  auto const r = synthesize( golden( "counter2.fsm" ), sample(), cfg );
  CHECK( r.cost.gates == 6 );
  CHECK( r.net.census().at( "SPLIT" ) == 5 );
  CHECK( r.verdict.equivalent );
}
