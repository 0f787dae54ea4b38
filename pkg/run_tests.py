import biarmpy as bp

if __name__ == '__main__':
    bp.run_tests(verbose=0)
