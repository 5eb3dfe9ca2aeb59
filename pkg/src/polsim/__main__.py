from polsim.cli import main

main()
